"""Exponential Pitman transforms, their compositions along words, and related chains.

Paths live on a uniform grid that starts at ``t0 > 0`` because the
transforms diverge at time 0.  The integral over the first cell ``[0, t0]``
is obtained from the local model ``g(t) = C t^p e^{ct}`` fitted through the
first three grid values; it covers smooth paths (``p = 0``) as well as the
``t^p`` behaviour produced by composed transforms.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .domain import Kind, ReflectionData
from .errors import HorizonError, NumericalError, ParameterError, SingularStartError
from .potential import Potential
from .sde import PathEnsemble, SimConfig, path_streams, run_em


@dataclass(frozen=True)
class Word:
    """Sequence of vectors ``gamma_1 .. gamma_q`` in ``R^m``, each with ``|gamma|^2 = 2``."""

    gammas: np.ndarray

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.gammas, dtype=float)).copy()
        norms = np.einsum("ij,ij->i", g, g)
        if np.any(np.abs(norms - 2.0) > 1e-12):
            raise ParameterError(f"every gamma must satisfy |gamma|^2 = 2, got {norms.tolist()}")
        g.setflags(write=False)
        object.__setattr__(self, "gammas", g)

    @property
    def q(self) -> int:
        return self.gammas.shape[0]

    @property
    def m(self) -> int:
        return self.gammas.shape[1]

    @property
    def gram(self) -> np.ndarray:
        return self.gammas @ self.gammas.T

    @classmethod
    def from_simple(cls, n: int, letters) -> "Word":
        """Word over ``alpha_j = e_j - e_{j+1}`` in ``R^n`` from 1-based letters."""
        return cls(np.array([simple_root(n, j) for j in letters]))


@dataclass(frozen=True)
class PathGrid:
    """Values ``(steps, m)`` at uniform times ``t0, t0 + dt, ...`` with ``t0 > 0``."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if t.ndim != 1 or t.size < 2 or v.shape[0] != t.size:
            raise ParameterError("times and values must have matching lengths >= 2")
        if not t[0] > 0:
            raise ParameterError("path grids must start at t0 > 0")
        h = np.diff(t)
        if np.any(h <= 0) or np.ptp(h) > 1e-9 * max(1.0, h[0]):
            raise ParameterError("times must be uniform and increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def component(self, i: int) -> "PathGrid":
        return PathGrid(self.times, self.values[:, i])


def uniform_grid(t_max: float, dt: float) -> np.ndarray:
    n = int(round(t_max / dt))
    return dt * np.arange(1, n + 1)


def simple_root(n: int, j: int) -> np.ndarray:
    e = np.zeros(n)
    e[j - 1], e[j] = 1.0, -1.0
    return e


def coroot(alpha) -> np.ndarray:
    a = np.asarray(alpha, dtype=float)
    return 2.0 * a / (a @ a)


# --------------------------------------------------------------------------
# log-space cumulative integrals


def _first_cell(t, lg):
    """``log int_0^{t0} g`` from ``log g = a + p log t + c t`` fitted through three points."""
    tt = t[:3]
    M = np.column_stack([np.ones(3), np.log(tt), tt])
    a, p, c = np.linalg.solve(M, lg[:3])
    if abs(c * t[0]) > 0.1:
        # the path is not smooth on the scale of one cell (e.g. Brownian):
        # fall back to a pure power law through the first two values
        c = 0.0
        p = (lg[1] - lg[0]) / np.log(t[1] / t[0])
        a = lg[0] - p * np.log(t[0])
    if p <= -1.0:
        raise NumericalError(f"integrand behaves like t^{p:.3g} at 0 and is not integrable")
    t0 = t[0]
    # int_0^{t0} t^p e^{ct} dt = t0^{p+1} sum_k (c t0)^k / (k! (p + k + 1))
    z = c * t0
    term, total = 1.0, 0.0
    for k in range(40):
        total += term / (p + k + 1.0)
        term *= z / (k + 1.0)
        if abs(term) < 1e-17 * abs(total):
            break
    return a + (p + 1.0) * np.log(t0) + np.log(total)


def log_cumulative_integral(times, log_g) -> np.ndarray:
    """``log int_0^t g`` on the grid from ``log g`` sampled at ``times``.

    Trapezoid cells in log space; the first cell ``[0, t0]`` integrates the
    local model ``g = C t^p e^{ct}`` fitted through the first three values
    (a pure power law through two values when the path is rough).
    """
    t = np.asarray(times, dtype=float)
    lg = np.asarray(log_g, dtype=float)
    if t.size < 3:
        raise ParameterError("need at least three grid points")
    if not np.all(np.isfinite(lg)):
        raise NumericalError("integrand is not finite on the grid")
    h = t[1] - t[0]
    first = _first_cell(t, lg)
    cells = np.logaddexp(lg[:-1], lg[1:]) + np.log(h / 2.0)
    out = np.logaddexp.accumulate(np.concatenate([[first], cells]))
    if not np.all(np.isfinite(out)):
        raise NumericalError("cumulative integral underflowed to 0")
    return out


# --------------------------------------------------------------------------
# transforms


def pitman_transform(eta: PathGrid, alpha) -> PathGrid:
    """``T_alpha eta(t) = eta(t) + log(int_0^t exp(-alpha^v . eta(s)) ds) alpha``."""
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (eta.m,) or not np.any(alpha):
        raise ParameterError("alpha must be a nonzero vector of the path dimension")
    logI = log_cumulative_integral(eta.times, -(eta.values @ coroot(alpha)))
    return PathGrid(eta.times, eta.values + logI[:, None] * alpha[None, :])


@dataclass(frozen=True)
class WordResult:
    etas: list
    ys: np.ndarray  # (steps, q)


def compose_word(eta: PathGrid, w: Word) -> WordResult:
    """``eta_j = T_{gamma_j} eta_{j-1}`` and ``y_j = gamma_j^v . eta_{j-1} + log int exp(-gamma_j^v . eta_{j-1})``."""
    if w.m != eta.m:
        raise ParameterError("word and path dimensions differ")
    etas = [eta]
    ys = []
    cur = eta
    for g in w.gammas:
        xi = cur.values @ coroot(g)
        logI = log_cumulative_integral(cur.times, -xi)
        ys.append(xi + logI)
        cur = PathGrid(cur.times, cur.values + logI[:, None] * g[None, :])
        etas.append(cur)
    return WordResult(etas, np.column_stack(ys))


def reflect(gamma, x) -> np.ndarray:
    """``s_gamma(x) = x - (2 gamma . x / |gamma|^2) gamma``."""
    g = np.asarray(gamma, dtype=float)
    x = np.asarray(x, dtype=float)
    return x - (x @ coroot(g))[..., None] * g if x.ndim > 1 else x - (x @ coroot(g)) * g


def beta_vectors(w: Word) -> np.ndarray:
    """``beta_k = s_{gamma_1} ... s_{gamma_{k-1}} (gamma_k)``, one row per ``k``."""
    out = []
    for k in range(w.q):
        v = w.gammas[k].copy()
        for j in range(k - 1, -1, -1):
            v = reflect(w.gammas[j], v)
        out.append(v)
    return np.array(out)


def word_theta(w: Word, mu) -> np.ndarray:
    """``theta_r = -beta_r . mu``."""
    return -(beta_vectors(w) @ np.asarray(mu, dtype=float))


def longest_element_word(n: int) -> Word:
    """``alpha_1 .. alpha_{n-1}, alpha_1 .. alpha_{n-2}, ..., alpha_1`` in ``R^n``."""
    if n < 2:
        raise ParameterError("n must be at least 2")
    letters = [j for top in range(n - 1, 0, -1) for j in range(1, top + 1)]
    return Word.from_simple(n, letters)


def alternating_word(q: int) -> Word:
    """``sqrt(2), -sqrt(2), sqrt(2), ...`` in one dimension."""
    s = np.sqrt(2.0)
    return Word(np.array([[s * (-1) ** j] for j in range(q)]))


def word_data(w: Word, mu) -> ReflectionData:
    """Orthant data of the ``y`` process: ``A = Gram``, ``Q[j, k] = gamma_j . gamma_k`` for ``j < k``."""
    G = w.gram
    Q = np.triu(G, k=1)
    return ReflectionData(N=np.eye(w.q), Q=Q, b=np.zeros(w.q), mu=-(w.gammas @ np.asarray(mu, dtype=float)),
                          A=G, kind=Kind.ORTHANT)


def y_sde_simulate(w: Word, U: Potential, mu, cfg: SimConfig) -> PathEnsemble:
    """``dy_k = gamma_k . d eta + [sum_{j<k} (gamma_k . gamma_j) U'(y_j) + U'(y_k)] dt``, ``eta = B + mu t``.

    ``B`` is standard Brownian motion in ``R^m``.  Requires ``theta(mu) > 0``.
    """
    theta = word_theta(w, mu)
    if np.any(theta <= 0):
        raise ParameterError(f"theta(mu) must be positive, got {theta.tolist()}")
    q = w.q
    V = np.eye(q) + np.triu(w.gram, k=1)
    c = w.gammas @ np.asarray(mu, dtype=float)
    x0 = cfg.start(q)
    return run_em(x0, np.eye(q), np.zeros(q), V, c, w.gammas, U, cfg)


# --------------------------------------------------------------------------
# one-dimensional chain


def log_trapezoid_from_zero(times, log_g) -> np.ndarray:
    """``log int_0^t g`` on a grid that starts at ``t = 0``; ``log g`` may be ``-inf``."""
    t = np.asarray(times, dtype=float)
    lg = np.asarray(log_g, dtype=float)
    if t[0] != 0.0:
        raise ParameterError("grid must start at t = 0")
    with np.errstate(invalid="ignore"):
        cells = np.logaddexp(lg[:-1], lg[1:]) + np.log(np.diff(t) / 2.0)
    return np.concatenate([[-np.inf], np.logaddexp.accumulate(cells)])


def s_operator(times, eta) -> np.ndarray:
    """``S eta(t) = eta(t) - 2 log int_0^t exp(-eta(s)) ds`` on a grid starting at 0."""
    eta = np.asarray(eta, dtype=float)
    with np.errstate(invalid="ignore"):
        return eta - 2.0 * log_trapezoid_from_zero(times, -eta)


def log_future_integral(times, log_g) -> np.ndarray:
    """``log int_t^T g`` on the grid (trapezoid, ``-inf`` at the last time)."""
    t = np.asarray(times, dtype=float)
    lg = np.asarray(log_g, dtype=float)
    cells = np.logaddexp(lg[:-1], lg[1:]) + np.log(np.diff(t) / 2.0)
    return np.concatenate([np.logaddexp.accumulate(cells[::-1])[::-1], [-np.inf]])


@dataclass(frozen=True)
class ChainResult:
    times: list  # grid of each level (levels shrink as the horizon is used up)
    Y: list  # eta, R eta, R^2 eta, ... on their grids
    J: list  # J_1, J_2, ... on the same grids
    J0: np.ndarray  # J_1(0), ..., J_depth(0)


def future_reflection(times, eta, drift: float, tail_tol: float = 0.01):
    """``R eta(t) = 2 J(t) - 2 J(0) - eta(t)`` with ``J(t) = -log int_t^inf exp(-eta)``.

    The infinite integral is truncated at the last grid time ``T`` and the
    tail is bounded by ``exp(-eta(T)) / drift``.  Returns ``(times, R eta, J)``
    restricted to the prefix where that bound is below ``tail_tol`` times the
    retained integral; :class:`HorizonError` if the bound already fails at 0.
    """
    t = np.asarray(times, dtype=float)
    eta = np.asarray(eta, dtype=float)
    logF = log_future_integral(t, -eta)
    tail = -eta[-1] - np.log(drift)
    ok = tail - logF <= np.log(tail_tol)
    if not ok[0]:
        raise HorizonError(f"tail bound exceeds {tail_tol:g} of the integral at t = 0; extend the horizon")
    stop = int(np.argmin(ok)) if not np.all(ok) else t.size
    J = -logF[:stop]
    return t[:stop], 2.0 * J - 2.0 * J[0] - eta[:stop], J


def s_operator_chain(times, eta, depth: int, drift: float, tail_tol: float = 0.01) -> ChainResult:
    """Iterate the future-infimum reflection and record ``J_k(0)``.

    ``J_{k+1}(t) = -log int_t^inf exp(-R^k eta)``.  For a Brownian driver
    with drift ``drift > 0`` each ``R^k eta`` is again such a driver, so the
    ``J_k(0)`` are identically distributed with ``-J_k(0) ~ Lambda_drift``.
    Each level loses the final stretch of the horizon where the truncation
    bound fails.
    """
    if not drift > 0:
        raise ParameterError("the driver needs a positive drift")
    t = np.asarray(times, dtype=float)
    if t[0] != 0.0:
        raise ParameterError("grid must start at t = 0")
    cur = np.asarray(eta, dtype=float)
    ts, Ys, Js = [t], [cur], []
    for _ in range(depth):
        if t.size < 2:
            raise HorizonError("horizon used up before reaching the requested depth")
        t, nxt, J = future_reflection(t, cur, drift, tail_tol)
        Js.append(J)
        cur = nxt
        ts.append(t)
        Ys.append(cur)
    return ChainResult(ts, Ys, Js, np.array([J[0] for J in Js]))


def chain_samples(mu: float, depth: int, n: int, seed: int, t_inf: float = 60.0, dt: float = 0.01) -> np.ndarray:
    """``J_1(0), .., J_depth(0)`` for ``n`` independent drivers ``B(t) + mu t``; shape ``(n, depth)``."""
    steps = int(round(t_inf / dt))
    t = dt * np.arange(steps + 1)
    out = np.empty((n, depth))
    for i, g in enumerate(path_streams(seed, n)):
        inc = g.standard_normal(steps) * np.sqrt(dt)
        eta = np.concatenate([[0.0], np.cumsum(inc)]) + mu * t
        out[i] = s_operator_chain(t, eta, depth, mu).J0
    return out


# --------------------------------------------------------------------------
# transform driven by a general potential


def _start_offset(U: Potential, xi0: float, t0: float) -> float:
    """``R(t0)`` for ``R' = U'(xi0 + R)``, ``R(0+) = -inf``, with ``xi`` frozen on ``[0, t0]``."""

    def inv(r):
        return 1.0 / float(U.du(xi0 + r))

    with np.errstate(over="ignore", divide="ignore"):
        probe = 60.0 * inv(-60.0)
    if not (np.isfinite(probe) and probe < 1e-8):
        raise SingularStartError("U' does not grow fast enough at -inf for the solution to leave -inf")

    def G(R):
        return integrate.quad(inv, -np.inf, R, epsabs=0.0, epsrel=1e-12, limit=200)[0] - t0

    hi = 0.0
    while G(hi) < 0:
        hi += 10.0
        if hi > 1e3:
            raise SingularStartError("could not bracket the starting value")
    lo = hi - 10.0
    while G(lo) > 0:
        lo -= 10.0
        if lo < -1e3:
            raise SingularStartError("could not bracket the starting value")
    return optimize.brentq(G, lo, hi, xtol=1e-14, rtol=1e-14)


def scalar_transform(times, xi, U: Potential, rtol: float = 1e-10) -> np.ndarray:
    """``T^(U) xi = xi + R`` with ``R' = U'(xi + R)`` and ``T^(U) xi(0+) = -inf``.

    ``xi`` is interpolated linearly between grid points; the stiff ODE is
    integrated with an implicit Runge-Kutta method (Radau).
    """
    t = np.asarray(times, dtype=float)
    xi = np.asarray(xi, dtype=float)
    # freeze xi at its extrapolated midpoint value on [0, t0]
    R0 = _start_offset(U, float(1.5 * xi[0] - 0.5 * xi[1]), float(t[0]))

    def rhs(s, R):
        return [float(U.du(np.interp(s, t, xi) + R[0]))]

    def jac(s, R):
        return [[float(U.d2u(np.interp(s, t, xi) + R[0]))]]

    sol = integrate.solve_ivp(rhs, (t[0], t[-1]), [R0], method="Radau", t_eval=t, jac=jac,
                              rtol=rtol, atol=1e-12, max_step=t[1] - t[0])
    if not sol.success or not np.all(np.isfinite(sol.y)):
        raise NumericalError(f"ODE integration failed: {sol.message}")
    return xi + sol.y[0]


def generalized_transform(eta: PathGrid, alpha, U: Potential) -> PathGrid:
    """``T_alpha^(U) eta = eta + (T^(U) xi - xi) alpha`` with ``xi = alpha^v . eta``.

    The component of ``eta`` orthogonal to ``alpha`` is left unchanged.  For
    ``U(x) = -exp(-x)`` and ``|alpha|^2 = 2`` this equals :func:`pitman_transform`.
    """
    alpha = np.asarray(alpha, dtype=float)
    xi = eta.values @ coroot(alpha)
    T = scalar_transform(eta.times, xi, U)
    return PathGrid(eta.times, eta.values + (T - xi)[:, None] * alpha[None, :])
