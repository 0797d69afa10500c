"""Polyhedral domain data, skew-symmetry checks and derived drift vectors.

A domain is the intersection of ``k`` half-spaces ``{x : n_j . x >= b_j}`` in
``R^d``.  Face ``j`` pushes the process in the direction ``v_j = n_j + q_j``
with ``q_j`` tangential to the face.  The rows of ``N`` and ``Q`` are the
``n_j`` and ``q_j``.

Two settings are supported:

* ``general``: any polyhedral domain with identity covariance.
* ``orthant``: ``N = I`` (so ``k = d``) with a covariance whose diagonal is a
  constant ``alpha > 0``.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError, InvalidDataError, SingularityError, SpanError

DEFAULT_TOL = 1e-9
_INVARIANT_TOL = 1e-12
_COND_LIMIT = 1e12


class Kind(str, Enum):
    GENERAL = "general"
    ORTHANT = "orthant"


class Condition(str, Enum):
    HW = "HW"
    ORTHANT = "Orthant"
    GENERALISED = "Generalised"


def _as_matrix(name, value):
    arr = np.array(value, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.size else arr.reshape(0, 0)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be a matrix, got shape {arr.shape}")
    return arr


def _as_vector(name, value):
    arr = np.atleast_1d(np.array(value, dtype=float))
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be a vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class ReflectionData:
    """The tuple ``(N, Q, b, mu, A)`` together with the declared setting.

    Arrays are copied and made read-only on construction; only shapes are
    checked here (see :func:`validate` for the mathematical invariants).
    """

    N: np.ndarray
    Q: np.ndarray
    b: np.ndarray
    mu: np.ndarray
    A: Optional[np.ndarray] = None
    kind: Kind = Kind.GENERAL

    def __post_init__(self):
        N = _as_matrix("N", self.N)
        Q = _as_matrix("Q", self.Q)
        k, d = N.shape
        b = _as_vector("b", self.b) if self.b is not None else np.zeros(k)
        mu = _as_vector("mu", self.mu)
        A = np.eye(d) if self.A is None else _as_matrix("A", self.A)
        kind = Kind(self.kind)
        if Q.shape != (k, d):
            raise DimensionError(f"Q has shape {Q.shape}, expected {(k, d)}")
        if b.shape != (k,):
            raise DimensionError(f"b has length {b.size}, expected {k}")
        if mu.shape != (d,):
            raise DimensionError(f"mu has length {mu.size}, expected {d}")
        if A.shape != (d, d):
            raise DimensionError(f"A has shape {A.shape}, expected {(d, d)}")
        for name, arr in (("N", N), ("Q", Q), ("b", b), ("mu", mu), ("A", A)):
            if not np.all(np.isfinite(arr)):
                raise DimensionError(f"{name} contains non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "kind", kind)

    @property
    def k(self) -> int:
        return self.N.shape[0]

    @property
    def d(self) -> int:
        return self.N.shape[1]

    @property
    def alpha(self) -> float:
        """Common diagonal entry of the covariance."""
        return float(self.A[0, 0])

    @property
    def V(self) -> np.ndarray:
        """Rows are the reflection directions ``v_j = n_j + q_j``."""
        return self.N + self.Q

    def replace(self, **changes) -> "ReflectionData":
        fields = dict(N=self.N, Q=self.Q, b=self.b, mu=self.mu, A=self.A, kind=self.kind)
        fields.update(changes)
        return ReflectionData(**fields)

    def permuted(self, order: Sequence[int]) -> "ReflectionData":
        """Reorder the faces; for orthant data the coordinates move with them."""
        order = list(order)
        if self.kind is Kind.ORTHANT:
            P = np.eye(self.d)[order]
            return self.replace(Q=P @ self.Q @ P.T, mu=P @ self.mu, A=P @ self.A @ P.T)
        return self.replace(N=self.N[order], Q=self.Q[order], b=self.b[order])

    def to_dict(self) -> dict:
        return {
            "N": self.N.tolist(),
            "Q": self.Q.tolist(),
            "b": self.b.tolist(),
            "mu": self.mu.tolist(),
            "A": self.A.tolist(),
            "kind": self.kind.value,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ReflectionData":
        missing = {"N", "Q", "mu"} - set(doc)
        if missing:
            raise DimensionError(f"reflection data is missing keys {sorted(missing)}")
        return cls(
            N=doc["N"],
            Q=doc["Q"],
            b=doc.get("b"),
            mu=doc["mu"],
            A=doc.get("A"),
            kind=doc.get("kind", "general"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ReflectionData":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        if not isinstance(other, ReflectionData):
            return NotImplemented
        return self.kind is other.kind and all(
            np.array_equal(getattr(self, f), getattr(other, f)) for f in ("N", "Q", "b", "mu", "A")
        )

    __hash__ = None


def orthant(Q, mu, A=None) -> ReflectionData:
    """Convenience constructor for orthant data (``N = I``, ``b = 0``)."""
    Q = np.atleast_2d(np.array(Q, dtype=float))
    d = Q.shape[0]
    return ReflectionData(N=np.eye(d), Q=Q, b=np.zeros(d), mu=mu, A=A, kind=Kind.ORTHANT)


@dataclass(frozen=True)
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"valid": self.valid, "violations": list(self.violations)}


def validate(data: ReflectionData) -> ValidationReport:
    """List every violated standing assumption; an empty list means valid."""
    out = []
    N, Q, A = data.N, data.Q, data.A
    k, d = data.k, data.d
    norms = np.linalg.norm(N, axis=1)
    for j in np.flatnonzero(np.abs(norms - 1.0) > _INVARIANT_TOL):
        out.append(f"unit normal: row {j} of N has norm {norms[j]:.6g}")
    dots = np.einsum("ij,ij->i", N, Q)
    for j in np.flatnonzero(np.abs(dots) > _INVARIANT_TOL):
        out.append(f"tangential reflection: q_{j} . n_{j} = {dots[j]:.6g}")
    if k < d:
        out.append(f"fewer faces than dimensions: k={k} < d={d}")
    if np.linalg.matrix_rank(N, tol=1e-10) < d:
        out.append("span: rows of N do not span R^d")
    if not np.allclose(A, A.T, atol=_INVARIANT_TOL, rtol=0):
        out.append("covariance: A is not symmetric")
    diag = np.diag(A)
    if np.ptp(diag) > _INVARIANT_TOL:
        out.append("covariance: diagonal of A is not constant")
    if diag[0] <= 0:
        out.append("covariance: diagonal of A must be positive")
    if np.linalg.eigvalsh((A + A.T) / 2).min() < -_INVARIANT_TOL:
        out.append("covariance: A is not positive semi-definite")
    if data.kind is Kind.GENERAL:
        if not np.allclose(A, np.eye(d), atol=_INVARIANT_TOL, rtol=0):
            out.append("kind: general domains require A = I")
    else:
        if k != d or not np.allclose(N, np.eye(d), atol=_INVARIANT_TOL, rtol=0):
            out.append("kind: orthant data require N = I")
        if np.any(np.abs(data.b) > _INVARIANT_TOL):
            out.append("kind: orthant data require b = 0")
    return ValidationReport(out)


def require_valid(data: ReflectionData) -> None:
    report = validate(data)
    if not report.valid:
        raise InvalidDataError(report.violations)


@dataclass(frozen=True)
class ConditionReport:
    defect: np.ndarray
    max_abs_defect: float
    passed: bool
    which_condition: Condition
    tolerance: float

    def to_dict(self) -> dict:
        return {
            "defect": self.defect.tolist(),
            "max_abs_defect": self.max_abs_defect,
            "passed": self.passed,
            "which_condition": self.which_condition.value,
            "tolerance": self.tolerance,
        }


def skew_symmetry_defect(data: ReflectionData, tol: float = DEFAULT_TOL) -> ConditionReport:
    """Residuals of ``n_j.q_r + n_r.q_j = 2 a_jr / alpha`` for ``j != r``."""
    require_valid(data)
    M = data.N @ data.Q.T
    defect = M + M.T
    if data.kind is Kind.ORTHANT:
        defect = defect - 2.0 * data.A / data.alpha
        identity_cov = np.allclose(data.A, np.eye(data.d), atol=_INVARIANT_TOL, rtol=0)
        which = Condition.HW if identity_cov else Condition.ORTHANT
        if not np.isclose(data.alpha, 1.0, rtol=0, atol=_INVARIANT_TOL):
            which = Condition.GENERALISED
    else:
        which = Condition.HW
    np.fill_diagonal(defect, 0.0)
    defect = (defect + defect.T) / 2
    worst = float(np.abs(defect).max()) if defect.size else 0.0
    return ConditionReport(defect, worst, worst <= tol, which, tol)


def _solve(M, rhs, what):
    if np.linalg.cond(M) > _COND_LIMIT:
        raise SingularityError(f"{what} is singular")
    return np.linalg.solve(M, rhs)


def find_invertible_submatrix(N) -> tuple:
    """Indices (0-based) of the first ``d`` rows, in order, that are independent.

    Greedy elimination: a row is kept when its component orthogonal to the
    rows already kept is non-negligible.
    """
    N = np.atleast_2d(np.asarray(N, dtype=float))
    k, d = N.shape
    basis = []
    chosen = []
    for j in range(k):
        r = N[j].copy()
        for e in basis:
            r -= (r @ e) * e
        scale = max(np.linalg.norm(N[j]), 1.0)
        if np.linalg.norm(r) > 1e-10 * scale:
            basis.append(r / np.linalg.norm(r))
            chosen.append(j)
            if len(chosen) == d:
                return tuple(chosen)
    raise SpanError(f"rows of N span only a {len(chosen)}-dimensional subspace of R^{d}")


def invertible_submatrices(N) -> list:
    """All index sets of ``d`` rows whose submatrix is invertible."""
    N = np.atleast_2d(np.asarray(N, dtype=float))
    k, d = N.shape
    return [
        idx
        for idx in itertools.combinations(range(k), d)
        if np.linalg.cond(N[list(idx)]) < _COND_LIMIT
    ]


def gamma_drift(data: ReflectionData, submatrix: Optional[Sequence[int]] = None) -> np.ndarray:
    """``(I - Nbar^{-1} Qbar)^{-1} mu`` for an invertible ``d x d`` block of ``N``."""
    require_valid(data)
    d = data.d
    if not np.allclose(data.A, np.eye(d), atol=_INVARIANT_TOL, rtol=0):
        raise InvalidDataError(["gamma_drift requires identity covariance"])
    idx = list(find_invertible_submatrix(data.N) if submatrix is None else submatrix)
    if len(idx) != d:
        raise DimensionError(f"submatrix needs {d} rows, got {len(idx)}")
    Nbar, Qbar = data.N[idx], data.Q[idx]
    NinvQ = _solve(Nbar, Qbar, "selected block of N")
    return _solve(np.eye(d) - NinvQ, data.mu, "I - Nbar^{-1} Qbar")


def delta_drift(data: ReflectionData) -> np.ndarray:
    """``(2A/alpha - I - Q)^{-1} mu`` for orthant data (``alpha = 1`` gives ``(2A-I-Q)^{-1} mu``)."""
    require_valid(data)
    if data.kind is not Kind.ORTHANT:
        raise InvalidDataError(["delta_drift requires orthant data"])
    d = data.d
    M = 2.0 * data.A / data.alpha - np.eye(d) - data.Q
    return _solve(M, data.mu, "2A/alpha - I - Q")


def theta_parameters(data: ReflectionData) -> np.ndarray:
    """Gamma shape parameters of the product-form marginals for ``U(x) = -exp(-x)``.

    For ``k = d`` with identity covariance the face coordinates
    ``n_j . x - b_j`` are independent copies of ``-log(G_j / 2)`` with
    ``G_j ~ Gamma(theta_j)`` and ``theta = 2 N^{-T} gamma(mu)``; under
    skew-symmetry this equals ``2 (N^T + Q^T)^{-1} mu``.  For orthant data
    with covariance diagonal ``alpha`` the shapes are ``2 delta / alpha``.
    """
    require_valid(data)
    if data.kind is Kind.ORTHANT:
        return 2.0 * delta_drift(data) / data.alpha
    if data.k != data.d:
        raise InvalidDataError(["theta_parameters requires k = d"])
    g = gamma_drift(data)
    return 2.0 * _solve(data.N.T, g, "N^T")
