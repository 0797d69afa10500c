"""Interacting particles driven by a potential of the gaps.

Particle 1 is a Brownian motion with drift ``nu_1``; particle ``k + 1``
follows ``dX_{k+1} = dB_{k+1} + nu_{k+1} dt + U'(X_{k+1} - X_k) dt``.  The
``literal`` drift convention replaces ``U'`` by ``-U`` (the two agree for
``U(x) = -exp(-x)``).  The gaps form a GRBM in an orthant whose covariance
has diagonal 2.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate, optimize

from .domain import Kind, ReflectionData
from .errors import GridBoundaryError, NonIntegrableError, ParameterError
from .potential import KERNEL_EXP, Potential
from .sde import PathEnsemble, SimConfig, run_em
from .stats import fokker_planck_1d_oracle

CONVENTIONS = ("generator", "literal")
STEP_GAP = 5.0


@dataclass(frozen=True)
class ParticleConfig:
    n: int
    nu: tuple
    U: Potential
    drift_convention: str = "generator"

    def __post_init__(self):
        if self.n < 2:
            raise ParameterError("need at least two particles")
        nu = tuple(float(v) for v in np.atleast_1d(self.nu))
        if len(nu) != self.n:
            raise ParameterError(f"nu has length {len(nu)}, expected {self.n}")
        if self.drift_convention not in CONVENTIONS:
            raise ParameterError(f"drift_convention must be one of {CONVENTIONS}")
        object.__setattr__(self, "nu", nu)

    def force(self):
        """``(potential, force_fn)`` as expected by :func:`grbm.sde.run_em`."""
        if self.drift_convention == "generator":
            return self.U, None
        if self.U.kernel is not None and self.U.kernel[0] == KERNEL_EXP and self.U.kernel[1] == 1.0:
            return self.U, None
        return self.U, lambda y: -self.U.u(y)


def _gap_matrices(n):
    Nm = np.zeros((n - 1, n))
    V = np.zeros((n - 1, n))
    for r in range(n - 1):
        Nm[r, r], Nm[r, r + 1] = -1.0, 1.0
        V[r, r + 1] = 1.0
    return Nm, V


def step_initial(n: int, L: float = STEP_GAP) -> np.ndarray:
    """``X_1(0) = 0`` and every gap ``-L``: a finite stand-in for the step condition."""
    return -L * np.arange(n, dtype=float)


def simulate_particles(pc: ParticleConfig, cfg: SimConfig) -> PathEnsemble:
    x0 = cfg.start(pc.n) if cfg.x0 is not None else step_initial(pc.n)
    Nm, V = _gap_matrices(pc.n)
    U, fn = pc.force()
    ens = run_em(x0, Nm, np.zeros(pc.n - 1), V, np.array(pc.nu), np.eye(pc.n), U, cfg, force_fn=fn)
    ens.meta.update({"drift_convention": pc.drift_convention})
    return ens


def gaps(ens: PathEnsemble) -> np.ndarray:
    return np.diff(ens.paths, axis=2)


def gap_data(pc: ParticleConfig) -> ReflectionData:
    """Orthant data of ``Y_j = X_{j+1} - X_j``.

    ``A`` is tridiagonal (2 on the diagonal, -1 next to it), ``Q[j, j+1] = -1``
    because ``U'(Y_j)`` pushes ``Y_{j+1}`` down, and ``mu_j = nu_j - nu_{j+1}``.
    """
    m = pc.n - 1
    A = 2.0 * np.eye(m) - np.eye(m, k=1) - np.eye(m, k=-1)
    Q = -np.eye(m, k=1)
    nu = np.array(pc.nu)
    mu = nu[:-1] - nu[1:]
    return ReflectionData(N=np.eye(m), Q=Q, b=np.zeros(m), mu=mu, A=A, kind=Kind.ORTHANT)


# --------------------------------------------------------------------------
# equilibrium gap law and speeds


def gap_log_density(U: Potential, alpha: float):
    """``U(y) - alpha y``: stationary log-density of the gap of two particles."""
    return lambda y: U.u(y) - alpha * np.asarray(y, dtype=float)


def equilibrium_speed(U: Potential, alpha: float, tol: float = 1e-12) -> float:
    """Mean stationary gap ``Psi_U(alpha)`` of two particles with ``nu = (alpha, 0)``.

    The density ``exp(U(y) - alpha y)`` is the stationary solution of
    ``dY = (U'(Y) - alpha) dt + sqrt(2) dW``; integrals by adaptive quadrature.
    """
    logw = gap_log_density(U, alpha)
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            res = optimize.minimize_scalar(lambda y: -float(logw(y)), bracket=(-1.0, 1.0))
    except (RuntimeError, ValueError) as exc:
        raise NonIntegrableError(f"gap density has no mode for alpha={alpha}") from exc
    mode, top = float(res.x), float(logw(res.x))
    if not np.isfinite(top) or abs(mode) > 1e3:
        raise NonIntegrableError(f"gap density has no finite mode for alpha={alpha}")
    reach = 200.0 if alpha <= 0 else max(200.0, 100.0 / alpha)
    for side in (-1, 1):
        far = mode + side * reach
        with np.errstate(over="ignore"):
            if float(logw(far)) > top - 50.0:
                raise NonIntegrableError(f"gap density does not decay for alpha={alpha}")

    def w(y):
        with np.errstate(over="ignore"):
            return float(np.exp(logw(y) - top))

    pts = [mode - 40, mode, mode + 40]
    opts = dict(epsabs=0.0, epsrel=tol, limit=400)
    Z = sum(integrate.quad(w, a, b, **opts)[0] for a, b in zip([-np.inf] + pts, pts + [np.inf]))
    M = sum(integrate.quad(lambda y: y * w(y), a, b, **opts)[0] for a, b in zip([-np.inf] + pts, pts + [np.inf]))
    return M / Z


def convex_conjugate(x, f, p):
    """``f*(p) = max_i (p x_i - f_i)`` over the grid vertices.

    This is the exact conjugate of the piecewise-linear interpolant of the
    table.  A maximiser on the first or last vertex means the grid is too
    short for that slope and raises :class:`GridBoundaryError`.
    """
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    p_arr = np.atleast_1d(np.asarray(p, dtype=float))
    vals = p_arr[:, None] * x[None, :] - f[None, :]
    idx = np.argmax(vals, axis=1)
    if np.any((idx == 0) | (idx == x.size - 1)):
        bad = p_arr[(idx == 0) | (idx == x.size - 1)]
        raise GridBoundaryError(f"supremum on the grid boundary for slopes {bad[:5].tolist()}; extend the grid")
    out = vals[np.arange(p_arr.size), idx]
    return out if np.ndim(p) else float(out[0])


def biconjugate(x, f, p_grid=None):
    """``f**`` on the grid; the chord slopes are used as dual grid by default."""
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    if p_grid is None:
        p_grid = np.diff(f) / np.diff(x)
    p_grid = np.asarray(p_grid, dtype=float)
    fstar = np.max(p_grid[:, None] * x[None, :] - f[None, :], axis=1)
    return np.max(p_grid[None, :] * x[:, None] - fstar[None, :], axis=1)


def step_speed(psi_x, psi_values, alpha):
    """``gamma(alpha) = inf_x (alpha x + Psi(x)) = -Psi*(-alpha)`` from a table of ``Psi``."""
    a = np.asarray(alpha, dtype=float)
    out = -convex_conjugate(psi_x, psi_values, -a)
    return out if np.ndim(alpha) else float(out)


# --------------------------------------------------------------------------
# polymer partition functions


def polymer_partition_smalln(n: int, B, t) -> np.ndarray:
    """``Z_n`` on the grid ``t`` for a driver ``B`` of shape ``(n, len(t))``.

    Uses ``Z_1 = exp(B_1)`` and ``Z_k(t) = int_0^t Z_{k-1}(s) exp(B_k(t) - B_k(s)) ds``
    with cumulative trapezoid sums in log space.
    """
    if not 1 <= n <= 3:
        raise ParameterError("polymer quadrature is only provided for n <= 3")
    B = np.atleast_2d(np.asarray(B, dtype=float))
    t = np.asarray(t, dtype=float)
    if B.shape[0] < n or B.shape[1] != t.size:
        raise ParameterError("driver must have shape (n, len(t))")
    logZ = B[0].copy()
    h = np.diff(t)
    for k in range(1, n):
        g = logZ - B[k]  # log of Z_{k-1}(s) exp(-B_k(s))
        cell = np.logaddexp(g[:-1], g[1:]) + np.log(h / 2)
        acc = np.concatenate([[-np.inf], np.logaddexp.accumulate(cell)])
        logZ = acc + B[k]
    return np.exp(logZ)


def particles_from_driver(pc: ParticleConfig, increments, dt: float, x0) -> np.ndarray:
    """Euler-Maruyama path of the particles for given Brownian increments ``(steps, n)``."""
    inc = np.asarray(increments, dtype=float)
    x = np.asarray(x0, dtype=float).copy()
    out = np.empty((inc.shape[0] + 1, pc.n))
    out[0] = x
    U, fn = pc.force()
    force = U.du if fn is None else fn
    nu = np.array(pc.nu)
    for s in range(inc.shape[0]):
        drift = nu.copy()
        drift[1:] += force(x[1:] - x[:-1])
        x = x + drift * dt + inc[s]
        out[s + 1] = x
    return out


def negative_gap_fraction(ens: PathEnsemble, burn_in: float = 0.0) -> np.ndarray:
    """Fraction of post-burn-in records with a negative gap, per gap."""
    states = ens.after(burn_in)
    return np.mean(np.diff(states, axis=2) < 0, axis=(0, 1))


def psi_table(U: Potential, alphas) -> np.ndarray:
    return np.array([equilibrium_speed(U, float(a)) for a in alphas])


def stationary_gap_law(U: Potential, alpha: float, grid: Optional[np.ndarray] = None):
    """Tabulated gap density from the one-dimensional Fokker-Planck oracle."""
    grid = np.linspace(-15.0, 40.0 / max(alpha, 0.05), 200_001) if grid is None else grid
    return fokker_planck_1d_oracle(lambda y: U.du(y) - alpha, 2.0, grid)
