"""Statistical and numerical oracles used to check simulations and densities."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_simpson, cumulative_trapezoid
from scipy.special import kolmogorov

from .errors import NonIntegrableError, ParameterError

EULER_GAMMA = 0.57721566490153286061

# B_{2k} / (2k) for k = 1..7
_ASYMPTOTIC = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)


def digamma(x):
    """psi(x) for x > 0: upward recurrence to x >= 10, then the asymptotic series."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise ParameterError("digamma is only implemented for positive arguments")
    z = arr.copy()
    shift = np.zeros_like(z)
    small = z < 10.0
    while np.any(small):
        shift = np.where(small, shift - 1.0 / np.where(small, z, 1.0), shift)
        z = np.where(small, z + 1.0, z)
        small = z < 10.0
    inv2 = 1.0 / (z * z)
    series = 0.0
    for c in reversed(_ASYMPTOTIC):
        series = (series + c) * inv2
    out = np.log(z) - 0.5 / z - series + shift
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class KSResult:
    D: float
    p_value: float
    n: int


def ks_statistic(samples, cdf: Callable) -> KSResult:
    """One-sample Kolmogorov-Smirnov statistic with the asymptotic p-value."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise ParameterError("no samples")
    if np.any(np.isnan(x)):
        raise ParameterError("samples contain NaN")
    n = x.size
    F = np.clip(np.asarray(cdf(x), dtype=float), 0.0, 1.0)
    i = np.arange(1, n + 1)
    D = float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))
    return KSResult(D, float(kolmogorov(np.sqrt(n) * D)), n)


def batch_means(series, n_batches: int = 20):
    """Mean and batch-means standard error of a (possibly correlated) series.

    A 2-D input is treated as independent rows (paths); each row is cut into
    ``n_batches`` consecutive batches and all batch means are pooled.
    """
    arr = np.asarray(series, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    rows, n = arr.shape
    if n == 0:
        raise ParameterError("empty series")
    nb = max(1, min(n_batches, n))
    size = n // nb
    means = arr[:, : nb * size].reshape(rows, nb, size).mean(axis=2).ravel()
    m = float(arr.mean())
    if means.size < 2:
        return m, float("nan")
    return m, float(means.std(ddof=1) / np.sqrt(means.size))


def empirical_moments(samples, orders=(1, 2), n_batches: int = 20) -> dict:
    """Raw moments of the requested orders plus mean/variance/skewness.

    Every entry is ``(value, stderr)`` with batch-means standard errors, so
    correlated time series are handled when passed in time order.
    """
    x = np.asarray(samples, dtype=float)
    out = {}
    for k in orders:
        out[f"m{k}"] = batch_means(x**k, n_batches)
    mean = float(x.mean())
    c = x - mean
    var = float(np.mean(c**2))
    out["mean"] = batch_means(x, n_batches)
    out["variance"] = (var, batch_means(c**2, n_batches)[1])
    if var > 0:
        z = c / np.sqrt(var)
        out["skewness"] = batch_means(z**3, n_batches)
    else:
        out["skewness"] = (0.0, 0.0)
    return out


@dataclass(frozen=True)
class TabulatedDensity:
    """A normalized density tabulated on a grid, with its CDF."""

    x: np.ndarray
    pdf: np.ndarray
    cdf_values: np.ndarray

    def cdf(self, t):
        return np.interp(t, self.x, self.cdf_values, left=0.0, right=1.0)

    def mean(self) -> float:
        return float(np.trapezoid(self.x * self.pdf, self.x))

    def integral(self) -> float:
        return float(np.trapezoid(self.pdf, self.x))


def fokker_planck_1d_oracle(
    drift: Callable,
    sigma2: float,
    grid,
    closed_left: bool = False,
    closed_right: bool = False,
    tail_tol: float = 1e-10,
) -> TabulatedDensity:
    """Stationary density ``exp{(2/sigma2) int drift}`` of a 1-D diffusion.

    The exponent is integrated with cumulative Simpson, the density is
    normalized with the trapezoid rule on the same grid.  Open ends must show
    decay below ``tail_tol`` relative to the peak; a closed end stands for a
    reflecting boundary and is not checked.
    """
    x = np.asarray(grid, dtype=float)
    if sigma2 <= 0:
        raise ParameterError("sigma2 must be positive")
    f = np.asarray(drift(x), dtype=float)
    expo = (2.0 / sigma2) * cumulative_simpson(f, x=x, initial=0.0)
    expo -= expo.max()
    p = np.exp(expo)
    if (not closed_left and p[0] > tail_tol) or (not closed_right and p[-1] > tail_tol):
        raise NonIntegrableError("stationary density does not decay at the grid ends")
    p /= np.trapezoid(p, x)
    F = cumulative_trapezoid(p, x, initial=0.0)
    F /= F[-1]
    return TabulatedDensity(x, p, F)
