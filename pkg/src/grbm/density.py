"""Product-form invariant densities, their normalization and log-gamma marginals.

Conventions.  With identity covariance the unnormalized log-density is

    2 * (sum_r U(n_r . x - b_r) - gamma(mu) . x).

For orthant data whose covariance has constant diagonal ``alpha`` it is

    (2 / alpha) * (sum_j U(x_j) - delta . x),   delta = (2A/alpha - I - Q)^{-1} mu,

which is what the rescaling ``x -> x / sqrt(alpha)`` of the unit-diagonal
case produces; it reduces to ``2 (sum_j U(x_j) - (2A - I - Q)^{-1} mu . x)``
when ``alpha = 1``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize
from scipy.special import gammaincc, gammaln, polygamma

from .domain import Kind, ReflectionData, delta_drift, gamma_drift, require_valid, skew_symmetry_defect
from .errors import InvalidDataError, NonIntegrableError, ParameterError
from .potential import KERNEL_EXP, Potential
from .stats import digamma


@dataclass(frozen=True)
class LogGammaLaw:
    """Law of ``-log(scale * G) / beta`` with ``G ~ Gamma(shape)``.

    Its density is proportional to ``exp(-shape * beta * x - exp(-beta * x) / scale)``.
    """

    shape: float
    scale: float = 0.5
    beta: float = 1.0

    def __post_init__(self):
        if not self.shape > 0:
            raise ParameterError(f"shape must be positive, got {self.shape}")
        if not (self.scale > 0 and self.beta > 0):
            raise ParameterError("scale and beta must be positive")

    def logpdf(self, x):
        bx = self.beta * np.asarray(x, dtype=float)
        with np.errstate(over="ignore"):
            return (
                np.log(self.beta)
                - self.shape * (bx + np.log(self.scale))
                - np.exp(-bx) / self.scale
                - gammaln(self.shape)
            )

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def cdf(self, x):
        with np.errstate(over="ignore"):
            g = np.exp(-self.beta * np.asarray(x, dtype=float)) / self.scale
        return gammaincc(self.shape, g)

    def sample(self, rng: np.random.Generator, n) -> np.ndarray:
        g = rng.gamma(self.shape, 1.0, size=n)
        return -np.log(self.scale * g) / self.beta

    @property
    def mean(self) -> float:
        return -(np.log(self.scale) + digamma(self.shape)) / self.beta

    @property
    def variance(self) -> float:
        return float(polygamma(1, self.shape)) / self.beta**2


def loggamma_marginal(alpha: float) -> LogGammaLaw:
    """``Lambda_alpha``: density ``exp{-2(alpha x + e^{-x})} / (2^{-2 alpha} Gamma(2 alpha))``."""
    if not alpha > 0:
        raise ParameterError("alpha must be positive")
    return LogGammaLaw(2.0 * alpha, 0.5, 1.0)


def loggamma_normalizer(alpha: float) -> float:
    """``int exp{-2(alpha x + e^{-x})} dx = 2^{-2 alpha} Gamma(2 alpha)``."""
    return float(np.exp(-2.0 * alpha * np.log(2.0) + gammaln(2.0 * alpha)))


# --------------------------------------------------------------------------
# closed-form log densities


def _points(x, d):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != d:
        raise ParameterError(f"points must have trailing dimension {d}")
    return x


def log_density_general(data: ReflectionData, U: Potential, x, gamma=None):
    """``2 (sum_r U(n_r . x - b_r) - gamma(mu) . x)``; ``x`` may be a batch ``(..., d)``."""
    x = _points(x, data.d)
    g = gamma_drift(data) if gamma is None else gamma
    y = x @ data.N.T - data.b
    return 2.0 * (np.sum(U.u(y), axis=-1) - x @ g)


def log_density_orthant(data: ReflectionData, U: Potential, x, delta=None):
    """``(2/alpha) (sum_j U(x_j) - delta . x)`` for orthant data."""
    if data.kind is not Kind.ORTHANT:
        raise InvalidDataError(["log_density_orthant requires orthant data"])
    x = _points(x, data.d)
    dl = delta_drift(data) if delta is None else delta
    return (2.0 / data.alpha) * (np.sum(U.u(x), axis=-1) - x @ dl)


def log_density(data: ReflectionData, U: Potential) -> Callable:
    """The closed-form log-density of ``data`` as a reusable callable."""
    require_valid(data)
    if data.kind is Kind.ORTHANT:
        dl = delta_drift(data)
        return lambda x: log_density_orthant(data, U, x, dl)
    g = gamma_drift(data)
    return lambda x: log_density_general(data, U, x, g)


def face_coordinates(data: ReflectionData, x):
    """``y_j = n_j . x - b_j`` (the orthant coordinates are the point itself)."""
    return np.asarray(x, dtype=float) @ data.N.T - data.b


def product_marginals(data: ReflectionData, U: Potential) -> list:
    """Laws of the independent face coordinates for exponential-type ``U``.

    Requires ``k = d`` and ``U(x) = -exp(-beta x)/beta``.
    """
    require_valid(data)
    if data.k != data.d:
        raise InvalidDataError(["product form needs k = d"])
    if U.kernel is None or U.kernel[0] != KERNEL_EXP:
        raise ParameterError("closed-form marginals exist only for exponential potentials")
    beta = U.kernel[1]
    if data.kind is Kind.ORTHANT:
        shapes = 2.0 * delta_drift(data) / (data.alpha * beta)
        scale = data.alpha * beta / 2.0
    else:
        shapes = 2.0 * np.linalg.solve(data.N.T, gamma_drift(data)) / beta
        scale = beta / 2.0
    if np.any(shapes <= 0):
        raise NonIntegrableError(f"non-positive marginal parameters {shapes.tolist()}")
    return [LogGammaLaw(float(s), scale, beta) for s in shapes]


def sample_stationary(data: ReflectionData, U: Potential, rng, n: int) -> np.ndarray:
    """Exact draws from the normalized product-form density, shape ``(n, d)``."""
    laws = product_marginals(data, U)
    y = np.column_stack([law.sample(rng, n) for law in laws])
    return np.linalg.solve(data.N, (y + data.b).T).T


# --------------------------------------------------------------------------
# normalization


@dataclass(frozen=True)
class DensitySpec:
    log_density: Callable
    dimension: int
    Z: Optional[float] = None
    Z_error: Optional[float] = None
    method: Optional[str] = None
    marginal_params: Optional[np.ndarray] = None


def density_spec(data: ReflectionData, U: Potential) -> DensitySpec:
    report = skew_symmetry_defect(data)
    if not report.passed:
        raise InvalidDataError([f"skew-symmetry fails (max defect {report.max_abs_defect:.3g})"])
    params = None
    if data.k == data.d and U.kernel is not None and U.kernel[0] == KERNEL_EXP:
        try:
            params = np.array([law.shape for law in product_marginals(data, U)])
        except NonIntegrableError:
            params = None
    return DensitySpec(log_density(data, U), data.d, marginal_params=params)


@dataclass(frozen=True)
class Normalization:
    Z: float
    error: float
    method: str
    box: Optional[np.ndarray] = None


def _find_mode(logp, d, start=None):
    x0 = np.zeros(d) if start is None else np.asarray(start, dtype=float)

    def obj(x):
        v = logp(x)
        return -v if np.isfinite(v) else 1e300

    res = optimize.minimize(obj, x0, method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000})
    res = optimize.minimize(obj, res.x, method="BFGS")
    x = res.x
    if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > 1e3:
        raise NonIntegrableError("log-density has no finite maximum")
    return x, float(logp(x))


def _box(logp, mode, top, drop=30.0, max_extent=1e3):
    """Axis box around ``mode`` whose faces sit ``drop`` below the peak."""
    d = mode.size
    lo = mode - 1.0
    hi = mode + 1.0
    for _ in range(200):
        grown = False
        for i in range(d):
            for side in (0, 1):
                pts = _face_points(lo, hi, i, side)
                if np.max(logp(pts)) > top - drop:
                    if side == 0:
                        lo[i] -= max(1.0, 0.5 * (hi[i] - lo[i]))
                    else:
                        hi[i] += max(1.0, 0.5 * (hi[i] - lo[i]))
                    grown = True
        if np.any(hi - lo > max_extent):
            raise NonIntegrableError("integrand does not decay inside the search box")
        if not grown:
            return np.column_stack([lo, hi])
    raise NonIntegrableError("box search did not settle")


def _face_points(lo, hi, i, side, m=25):
    d = lo.size
    axes = [np.linspace(lo[j], hi[j], m) if j != i else np.array([(lo, hi)[side][i]]) for j in range(d)]
    return np.array(list(itertools.product(*axes)))


def normalization(spec: DensitySpec, method: str = "quadrature", budget: int = 200_000,
                  seed: int = 0, tol: float = 1e-10, start=None) -> Normalization:
    """Normalizing constant of ``exp(log_density)`` with an error estimate.

    ``quadrature`` (``d <= 3``) integrates adaptively over a box whose faces
    lie ``e^{-30}`` below the peak.  ``monte-carlo`` uses importance sampling
    from a Student-t proposal (3 degrees of freedom) centred at the mode.
    """
    d = spec.dimension

    def logp(x):
        return np.asarray(spec.log_density(np.atleast_2d(x)), dtype=float).reshape(-1)

    mode, top = _find_mode(lambda x: logp(x)[0], d, start)
    if method == "quadrature":
        if d > 3:
            raise ParameterError("quadrature is limited to d <= 3")
        box = _box(logp, mode, top)

        def f(*args):
            with np.errstate(over="ignore"):
                return float(np.exp(logp(np.array(args))[0] - top))

        opts = {"epsabs": 0.0, "epsrel": tol, "limit": 500}
        val, err = integrate.nquad(f, box.tolist(), opts=[opts] * d)
        scale = np.exp(top)
        return Normalization(val * scale, err * scale, "quadrature", box)
    if method == "monte-carlo":
        from scipy.stats import multivariate_t

        H = _hessian(lambda x: logp(x)[0], mode)
        cov = np.linalg.inv(-H) if np.all(np.linalg.eigvalsh(-H) > 0) else np.eye(d)
        prop = multivariate_t(loc=mode, shape=4.0 * cov, df=3)
        rng = np.random.default_rng(seed)
        xs = np.asarray(prop.rvs(size=budget, random_state=rng)).reshape(budget, d)
        lw = logp(xs) - prop.logpdf(xs).reshape(-1) - top
        w = np.exp(lw)
        Z = float(w.mean()) * np.exp(top)
        err = float(w.std(ddof=1) / np.sqrt(budget)) * np.exp(top)
        return Normalization(Z, err, "monte-carlo")
    raise ParameterError(f"unknown normalization method {method!r}")


def _hessian(f, x, h=1e-4):
    d = x.size
    H = np.empty((d, d))
    E = np.eye(d) * h
    for i in range(d):
        for j in range(i, d):
            v = (f(x + E[i] + E[j]) - f(x + E[i] - E[j]) - f(x - E[i] + E[j]) + f(x - E[i] - E[j])) / (4 * h * h)
            H[i, j] = H[j, i] = v
    return H
