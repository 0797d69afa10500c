"""Generator, drift field and residuals of the stationarity equation ``G* p = 0``.

The formal adjoint is ``G* = 1/2 div(A grad) - Omega . grad - div Omega``.
Two independent routes evaluate ``(G* p)(x) / p(x)``:

* :func:`adjoint_residual_fd` applies central differences to ``p`` itself,
  never touching derivatives of ``U``;
* :func:`adjoint_residual_analytic` is the closed form obtained from
  ``p = exp(W)`` with the exact derivatives ``U'`` and ``U''``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import density as _density
from .domain import Kind, ReflectionData, delta_drift, gamma_drift, require_valid
from .errors import InvalidDataError, StencilUnderflowError
from .potential import Potential


@dataclass(frozen=True)
class GeneratorSpec:
    """Data and potential defining ``G = 1/2 div(A grad) + Omega . grad``."""

    data: ReflectionData
    U: Potential

    def __post_init__(self):
        require_valid(self.data)

    @property
    def diffusion(self) -> np.ndarray:
        return self.data.A

    def face_arguments(self, x):
        return np.asarray(x, dtype=float) @ self.data.N.T - self.data.b

    def drift(self, x):
        """``Omega(x) = sum_r U'(n_r . x - b_r) (q_r + n_r) - mu``; batches allowed."""
        return self.U.du(self.face_arguments(x)) @ self.data.V - self.data.mu

    def divergence(self, x):
        """``div Omega = sum_r U''(n_r . x - b_r) v_r . n_r``."""
        vn = np.einsum("ij,ij->i", self.data.V, self.data.N)
        return self.U.d2u(self.face_arguments(x)) @ vn

    def log_density_parts(self):
        """``(c, g)`` with ``log p = c * (sum_r U(n_r . x - b_r) - g . x)``."""
        if self.data.kind is Kind.ORTHANT:
            return 2.0 / self.data.alpha, delta_drift(self.data)
        return 2.0, gamma_drift(self.data)

    def log_density(self, x):
        c, g = self.log_density_parts()
        y = self.face_arguments(x)
        return c * (np.sum(self.U.u(y), axis=-1) - np.asarray(x, dtype=float) @ g)


def drift_field(spec: GeneratorSpec, x):
    return spec.drift(x)


def apply_generator(spec: GeneratorSpec, f, x) -> float:
    """``1/2 tr(A Hess f(x)) + Omega(x) . grad f(x)``.

    ``f`` must provide ``grad(x)`` and ``hess(x)``.
    """
    x = np.asarray(x, dtype=float)
    return 0.5 * float(np.sum(spec.diffusion * f.hess(x))) + float(spec.drift(x) @ f.grad(x))


def _stencil_residual(spec, logp, x, h):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, d = x.shape
    A = spec.diffusion
    base = logp(x)
    if np.any(base < -700):
        raise StencilUnderflowError("log-density below -700 at an evaluation point")
    E = np.eye(d) * h

    def p(y):
        lv = logp(y)
        if np.any(lv < -700):
            raise StencilUnderflowError("log-density below -700 on the stencil")
        return np.exp(lv - base)

    out = np.zeros(n)
    p_plus = [p(x + E[i]) for i in range(d)]
    p_minus = [p(x - E[i]) for i in range(d)]
    for i in range(d):
        out += 0.5 * A[i, i] * (p_plus[i] - 2.0 + p_minus[i]) / h**2
        flux_p = spec.drift(x + E[i])[:, i] * p_plus[i]
        flux_m = spec.drift(x - E[i])[:, i] * p_minus[i]
        out -= (flux_p - flux_m) / (2 * h)
        for j in range(i + 1, d):
            if A[i, j] == 0.0:
                continue
            mixed = (p(x + E[i] + E[j]) - p(x + E[i] - E[j]) - p(x - E[i] + E[j]) + p(x - E[i] - E[j])) / (4 * h * h)
            out += A[i, j] * mixed
    return out


def adjoint_residual_fd(spec: GeneratorSpec, x, h: float = 1e-3, richardson: bool = False,
                        logp: Optional[Callable] = None):
    """``(G* p)(x) / p(x)`` by central differences of step ``h`` on ``p``.

    The divergence form ``1/2 div(A grad p) - div(Omega p)`` is differenced
    directly, so no derivative of ``U`` enters.  ``x`` may be a batch.
    """
    logp = spec.log_density if logp is None else logp
    r = _stencil_residual(spec, logp, x, h)
    if richardson:
        r = (4.0 * _stencil_residual(spec, logp, x, h / 2) - r) / 3.0
    return r if np.ndim(x) > 1 else float(r[0])


def adjoint_residual_analytic(spec: GeneratorSpec, x):
    """Exact ``(G* p)/p`` for ``p = exp(W)``, ``W = c (sum_r U(y_r) - g . x)``.

    Uses ``G* p / p = 1/2 (tr(A Hess W) + grad W . A grad W) - Omega . grad W - div Omega``.
    Valid for any data, skew-symmetric or not.
    """
    xx = np.atleast_2d(np.asarray(x, dtype=float))
    c, g = spec.log_density_parts()
    N, A = spec.data.N, spec.diffusion
    y = spec.face_arguments(xx)
    du, d2u = spec.U.du(y), spec.U.d2u(y)
    grad = c * (du @ N - g)
    nan = np.einsum("ri,ij,rj->r", N, A, N)  # n_r . A n_r
    trace = c * (d2u @ nan)
    quad = np.einsum("ni,ij,nj->n", grad, A, grad)
    omega = du @ spec.data.V - spec.data.mu
    r = 0.5 * (trace + quad) - np.einsum("ni,ni->n", omega, grad) - spec.divergence(xx)
    return r if np.ndim(x) > 1 else float(r[0])


def reduced_residual(spec: GeneratorSpec, x):
    """``2 sum_r U'(n_r . x - b_r) [N mu - (N - Q) gamma]_r`` (identity covariance).

    Equals the exact residual when the skew-symmetry condition holds and
    ``|gamma|^2 = gamma . mu``.
    """
    data = spec.data
    if not np.allclose(data.A, np.eye(data.d)):
        raise InvalidDataError(["reduced residual needs identity covariance"])
    g = gamma_drift(data)
    coeff = data.N @ data.mu - (data.N - data.Q) @ g
    xx = np.atleast_2d(np.asarray(x, dtype=float))
    r = 2.0 * spec.U.du(spec.face_arguments(xx)) @ coeff
    return r if np.ndim(x) > 1 else float(r[0])


def density_points(spec: GeneratorSpec, n: int, seed: int = 0) -> np.ndarray:
    """Evaluation points drawn from the product-form density of ``spec``."""
    rng = np.random.default_rng(seed)
    return _density.sample_stationary(spec.data, spec.U, rng, n)


# --------------------------------------------------------------------------
# weak form


@dataclass(frozen=True)
class Bump:
    """``f(x) = exp(-1 / (1 - |x - c|^2 / r^2))`` inside the ball, 0 outside."""

    center: np.ndarray
    radius: float

    def _s(self, x):
        z = (np.asarray(x, dtype=float) - self.center) / self.radius
        return z, float(z @ z)

    def value(self, x):
        z, s = self._s(x)
        return 0.0 if s >= 1 else float(np.exp(-1.0 / (1.0 - s)))

    def grad(self, x):
        z, s = self._s(x)
        if s >= 1:
            return np.zeros_like(z)
        f = np.exp(-1.0 / (1.0 - s))
        return f * (-2.0 * z / (1.0 - s) ** 2) / self.radius

    def hess(self, x):
        z, s = self._s(x)
        d = z.size
        if s >= 1:
            return np.zeros((d, d))
        f = np.exp(-1.0 / (1.0 - s))
        u = 1.0 - s
        a = -2.0 / u**2  # grad_z f = f a z
        da = -8.0 / u**3  # 2 da/ds, since ds/dz = 2 z
        H = f * (a * a * np.outer(z, z) + a * np.eye(d) + da * np.outer(z, z))
        return H / self.radius**2


def _bump_generator(spec: GeneratorSpec, f: Bump, x):
    """``(G f)(x)`` and ``f(x)`` for a batch of points, vectorised."""
    z = (x - f.center) / f.radius
    s = np.einsum("ni,ni->n", z, z)
    inside = s < 1.0
    u = np.where(inside, 1.0 - s, 1.0)
    val = np.where(inside, np.exp(-1.0 / u), 0.0)
    a = -2.0 / u**2
    da = -8.0 / u**3
    A = spec.diffusion
    zAz = np.einsum("ni,ij,nj->n", z, A, z)
    second = 0.5 * ((a * a + da) * zAz + a * np.trace(A)) / f.radius**2
    first = a * np.einsum("ni,ni->n", spec.drift(x), z) / f.radius
    return val * (second + first), val


def weak_stationarity(spec: GeneratorSpec, f: Bump, nodes: int = 400):
    """``int (G f) p / int_ball p`` for a smooth bump ``f``; zero when ``p`` is stationary.

    Tensor Gauss-Legendre on the bounding box of the bump.  The integrand is
    smooth with all derivatives vanishing on the sphere, so the rule converges
    faster than any power; the error estimate compares with two thirds of the nodes.
    """

    def rule(n):
        t, w = np.polynomial.legendre.leggauss(n)
        d = spec.data.d
        grids = np.meshgrid(*([t] * d), indexing="ij")
        pts = f.center + f.radius * np.stack([g.ravel() for g in grids], axis=1)
        wts = np.prod(np.meshgrid(*([w] * d), indexing="ij"), axis=0).ravel()
        logp = spec.log_density(pts)
        p = np.exp(logp - logp.max())
        gf, val = _bump_generator(spec, f, pts)
        mass = np.sum(wts * p * (val > 0))
        return float(np.sum(wts * gf * p) / mass)

    fine = rule(nodes)
    coarse = rule(max(8, 2 * nodes // 3))
    return fine, abs(fine - coarse)
