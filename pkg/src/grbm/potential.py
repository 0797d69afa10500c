"""Potentials ``U`` and a numerical audit of their regularity conditions."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .domain import ReflectionData, require_valid
from .errors import ParameterError, RegularityError

# Kernel codes understood by the compiled simulation loops.
KERNEL_ZERO = 0
KERNEL_EXP = 1
KERNEL_SOFTPLUS = 2
KERNEL_LINEAR = 3


@dataclass(frozen=True)
class Potential:
    """Evaluator triple ``(U, U', U'')`` with a name and its parameters.

    ``kernel`` is ``(code, p0, p1)`` when a compiled evaluator exists for the
    family; custom potentials leave it ``None`` and are simulated through
    the pure-numpy path.
    """

    name: str
    u: Callable
    du: Callable
    d2u: Callable
    params: dict = field(default_factory=dict)
    kernel: Optional[tuple] = None

    def to_dict(self) -> dict:
        return {"name": self.name, "params": dict(self.params)}


def exponential() -> Potential:
    """``U(x) = -exp(-x)``."""
    return beta_exponential(1.0, name="exponential")


def beta_exponential(beta: float, name: str = "beta_exponential") -> Potential:
    """``U(x) = -exp(-beta x) / beta``; tends to a hard wall as ``beta`` grows."""
    beta = float(beta)
    if beta <= 0:
        raise ParameterError("beta must be positive")

    def u(x):
        with np.errstate(over="ignore"):
            return -np.exp(-beta * np.asarray(x, dtype=float)) / beta

    def du(x):
        with np.errstate(over="ignore"):
            return np.exp(-beta * np.asarray(x, dtype=float))

    def d2u(x):
        with np.errstate(over="ignore"):
            return -beta * np.exp(-beta * np.asarray(x, dtype=float))

    params = {} if name == "exponential" else {"beta": beta}
    return Potential(name, u, du, d2u, params, (KERNEL_EXP, beta, 0.0))


def softplus(c: float = 1.0) -> Potential:
    """``U(x) = -c log(1 + exp(-x))``: concave, with bounded slope."""
    c = float(c)
    if c <= 0:
        raise ParameterError("c must be positive")

    def u(x):
        return -c * np.logaddexp(0.0, -np.asarray(x, dtype=float))

    def du(x):
        x = np.asarray(x, dtype=float)
        return c * np.exp(-np.logaddexp(0.0, x))

    def d2u(x):
        x = np.asarray(x, dtype=float)
        s = np.exp(-np.logaddexp(0.0, x))
        return -c * s * (1.0 - s)

    return Potential("softplus", u, du, d2u, {"c": c}, (KERNEL_SOFTPLUS, c, 0.0))


def zero() -> Potential:
    """``U = 0``: no interaction with the faces at all."""

    def u(x):
        return np.zeros_like(np.asarray(x, dtype=float))

    return Potential("zero", u, u, u, {}, (KERNEL_ZERO, 0.0, 0.0))


def linear(slope: float = 1.0) -> Potential:
    """``U(x) = slope * x``."""
    slope = float(slope)

    def u(x):
        return slope * np.asarray(x, dtype=float)

    def du(x):
        return np.full_like(np.asarray(x, dtype=float), slope)

    def d2u(x):
        return np.zeros_like(np.asarray(x, dtype=float))

    return Potential("linear", u, du, d2u, {"slope": slope}, (KERNEL_LINEAR, slope, 0.0))


BUILTINS = {
    "exponential": exponential,
    "beta_exponential": beta_exponential,
    "softplus": softplus,
    "zero": zero,
    "linear": linear,
}


def from_dict(doc: dict) -> Potential:
    """Build a builtin from ``{"name": ..., "params": {...}}``."""
    name = doc.get("name")
    if name not in BUILTINS:
        raise ParameterError(f"unknown potential {name!r}; choose from {sorted(BUILTINS)}")
    return BUILTINS[name](**doc.get("params", {}))


def custom(name, u, du, d2u, **params) -> Potential:
    return Potential(name, u, du, d2u, params, None)


# --------------------------------------------------------------------------
# regularity audit

_AUDIT_GRID = (-30.0, 30.0, 0.01)
_ALPHAS = tuple(2.0**e for e in range(-4, 9))


def _grid(spec):
    lo, hi, step = spec
    n = int(round((hi - lo) / step)) + 1
    return np.linspace(lo, hi, n)


def is_concave(U: Potential, grid=_AUDIT_GRID, tol=1e-12) -> bool:
    x = _grid(grid)
    return bool(np.all(U.d2u(x) <= tol))


def theta_slope(U: Potential, a: float, grid=None) -> float:
    """Least slope ``theta > 0`` with ``U(x+a) - U(a) <= theta x`` for all ``x``.

    For concave ``U`` this is ``U'(a)``.  Otherwise the chord slopes are
    scanned over ``grid`` (default ``[-30, 30]``).
    """
    a = float(a)
    if grid is None and is_concave(U):
        theta = float(U.du(a))
        if not np.isfinite(theta) or theta <= 0:
            raise RegularityError(f"U'({a}) = {theta} is not a positive finite slope")
        return theta
    x = _grid(grid or _AUDIT_GRID)
    x = x[x != 0.0]
    with np.errstate(over="ignore", invalid="ignore"):
        chord = (U.u(x + a) - U.u(a)) / x
    upper = chord[x < 0]
    lower = chord[x > 0]
    theta = max(float(np.max(lower)) if lower.size else 0.0, 0.0)
    ceiling = float(np.min(upper)) if upper.size else np.inf
    if not np.isfinite(theta) or theta > ceiling or ceiling <= 0:
        raise RegularityError(f"no finite positive slope bounds U around a={a}")
    return theta if theta > 0 else min(ceiling, 1e-12)


@dataclass(frozen=True)
class ConditionCheck:
    passed: bool
    detail: str
    witness: Optional[float] = None

    def to_dict(self):
        return {"passed": self.passed, "detail": self.detail, "witness": self.witness}


@dataclass(frozen=True)
class RegularityReport:
    growth: ConditionCheck
    slopes: ConditionCheck
    lyapunov: ConditionCheck
    thetas: tuple = ()
    alpha: Optional[float] = None
    kappa: Optional[float] = None

    @property
    def passed(self) -> bool:
        return self.growth.passed and self.slopes.passed and self.lyapunov.passed

    def to_dict(self):
        return {
            "passed": self.passed,
            "growth": self.growth.to_dict(),
            "slopes": self.slopes.to_dict(),
            "lyapunov": self.lyapunov.to_dict(),
            "thetas": list(self.thetas),
            "alpha": self.alpha,
            "kappa": self.kappa,
        }


def _check_growth(U, x):
    g = x - U.u(x)
    ends = (x[0], x[-1])
    for end in ends:
        levels = np.array([end / 4, end / 2, end])
        vals = levels - U.u(levels)
        if not (np.all(np.diff(vals) > 0) and vals[-1] > 10.0):
            return ConditionCheck(False, "x - U(x) does not grow towards this end", float(end))
    return ConditionCheck(True, f"x - U(x) reaches {min(g[0], g[-1]):.3g} at the grid ends")


def regularity_report(U: Potential, data: ReflectionData, grid=_AUDIT_GRID) -> RegularityReport:
    """Numerical evidence for the three sufficient regularity conditions."""
    require_valid(data)
    x = _grid(grid)
    growth = _check_growth(U, x)

    thetas = []
    for r in range(data.k):
        try:
            thetas.append(theta_slope(U, -data.b[r]))
        except RegularityError as exc:
            slopes = ConditionCheck(False, str(exc), float(-data.b[r]))
            return RegularityReport(growth, slopes, ConditionCheck(False, "needs slopes"))
    thetas = np.array(thetas)
    slopes = ConditionCheck(True, "slope bound found for every face")

    M = data.V @ data.N.T  # M[r, s] = v_r . n_s
    gam = M @ thetas + data.N @ data.mu
    du, d2u, u = U.du(x), U.d2u(x), U.u(x)
    lhs = gam[:, None] * du[None, :] - 0.5 * d2u[None, :]
    witness = None
    for a in _ALPHAS:
        resid = lhs - a * (thetas[:, None] * x[None, :] - u[None, :])
        if not np.all(np.isfinite(resid)):
            continue
        inner = max(1, int(round(1.0 / (x[1] - x[0]))))
        left_ok = resid[:, 0] <= resid[:, inner]
        right_ok = resid[:, -1] <= resid[:, -1 - inner]
        if np.all(left_ok) and np.all(right_ok):
            kappa = max(float(resid.max()), 0.0) + 1e-12
            check = ConditionCheck(True, f"alpha={a:g}, kappa={kappa:.4g}")
            return RegularityReport(growth, slopes, check, tuple(thetas), a, kappa)
        witness = float(x[0] if not np.all(left_ok) else x[-1])
    lyap = ConditionCheck(False, "residual grows at the grid boundary for every alpha", witness)
    return RegularityReport(growth, slopes, lyap, tuple(thetas))
