"""Euler-Maruyama simulation, the discrete Skorokhod map and the hard-wall limit.

Noise comes from one Philox stream per path, spawned from a single
``SeedSequence``; a path's increments therefore depend only on ``(seed,
path index)`` and not on how many paths run or on how they are scheduled.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.stats import expon

from . import _kernels
from .adjoint import GeneratorSpec
from .density import LogGammaLaw, product_marginals
from .domain import Kind, ReflectionData, delta_drift, gamma_drift, require_valid
from .errors import (BlowUpError, InvalidDataError, IterationDivergenceError, NonIntegrableError,
                     ParameterError)
from .potential import Potential, beta_exponential, zero
from .stats import batch_means, ks_statistic

GUARD = 1e8
_CHUNK_VALUES = 1 << 21  # normals generated per block, summed over paths
BINARY_MAGIC = b"GRBM1"


@dataclass(frozen=True)
class SimConfig:
    dt: float
    t_max: float
    burn_in: float = 0.0
    seed: int = 0
    x0: Optional[tuple] = None
    n_paths: int = 1
    thin: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError("dt must be positive")
        if not self.dt <= self.t_max:
            raise ParameterError("dt must not exceed t_max")
        if not self.burn_in < self.t_max:
            raise ParameterError("burn_in must be smaller than t_max")
        if self.n_paths < 1 or self.thin < 1:
            raise ParameterError("n_paths and thin must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError("seed must be an unsigned 64-bit integer")
        if self.x0 is not None:
            object.__setattr__(self, "x0", tuple(float(v) for v in np.atleast_1d(self.x0)))

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))

    def start(self, d: int) -> np.ndarray:
        if self.x0 is None:
            return np.zeros(d)
        x0 = np.asarray(self.x0, dtype=float)
        if x0.size == 1 and d > 1:
            x0 = np.full(d, x0[0])
        if x0.shape != (d,):
            raise ParameterError(f"x0 has length {x0.size}, expected {d}")
        return x0

    def to_dict(self) -> dict:
        return {
            "dt": self.dt,
            "t_max": self.t_max,
            "burn_in": self.burn_in,
            "seed": int(self.seed),
            "x0": None if self.x0 is None else list(self.x0),
            "n_paths": self.n_paths,
            "thin": self.thin,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SimConfig":
        keys = ("dt", "t_max", "burn_in", "seed", "x0", "n_paths", "thin")
        unknown = set(doc) - set(keys)
        if unknown:
            raise ParameterError(f"unknown sim keys {sorted(unknown)}")
        return cls(**{k: doc[k] for k in keys if k in doc})


@dataclass
class PathEnsemble:
    """Recorded states ``paths[path, record, coordinate]`` on a uniform grid."""

    grid: np.ndarray
    paths: np.ndarray
    seed: int
    scheme: str
    dt: float
    thin: int = 1
    regulator: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    @property
    def dimension(self) -> int:
        return self.paths.shape[2]

    def after(self, burn_in: float) -> np.ndarray:
        """States recorded at times ``>= burn_in``, shape ``(paths, records, d)``."""
        mask = self.grid >= burn_in - 1e-12
        if not np.any(mask):
            raise ParameterError("no records after burn-in")
        return self.paths[:, mask, :]

    def to_csv(self, fh, precision: int = 17) -> None:
        d = self.dimension
        fh.write("path_id,t," + ",".join(f"x_{i + 1}" for i in range(d)) + "\n")
        fmt = f"{{:.{precision}g}}"
        for p in range(self.n_paths):
            for t, row in zip(self.grid, self.paths[p]):
                fh.write(f"{p}," + fmt.format(t) + "," + ",".join(fmt.format(v) for v in row) + "\n")

    def to_binary(self) -> bytes:
        """``GRBM1`` header, then ``n_paths, n_records, d`` as uint64, grid and paths as float64 (little endian)."""
        head = BINARY_MAGIC + struct.pack("<QQQ", self.n_paths, self.grid.size, self.dimension)
        return head + self.grid.astype("<f8").tobytes() + self.paths.astype("<f8").tobytes()

    @classmethod
    def from_binary(cls, blob: bytes, dt: float = float("nan"), seed: int = -1) -> "PathEnsemble":
        if blob[:5] != BINARY_MAGIC:
            raise ParameterError("not a GRBM1 ensemble")
        P, T, d = struct.unpack("<QQQ", blob[5:29])
        grid = np.frombuffer(blob, "<f8", T, 29).copy()
        paths = np.frombuffer(blob, "<f8", P * T * d, 29 + 8 * T).reshape(P, T, d).copy()
        return cls(grid, paths, seed, "binary", dt)


# --------------------------------------------------------------------------
# noise


def path_streams(seed: int, n_paths: int) -> list:
    """One independent Philox generator per path."""
    children = np.random.SeedSequence(int(seed)).spawn(n_paths)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def noise_blocks(seed: int, n_paths: int, n_steps: int, m: int):
    """Yield ``(start, block)`` with ``block`` of shape ``(paths, steps, m)``."""
    gens = path_streams(seed, n_paths)
    size = max(1, _CHUNK_VALUES // (n_paths * m))
    start = 0
    while start < n_steps:
        s = min(size, n_steps - start)
        yield start, np.stack([g.standard_normal((s, m)) for g in gens])
        start += s


def sqrt_psd(A) -> np.ndarray:
    """Symmetric square root via the eigendecomposition (works for singular ``A``)."""
    w, U = np.linalg.eigh((np.asarray(A) + np.asarray(A).T) / 2)
    return (U * np.sqrt(np.clip(w, 0.0, None))) @ U.T


# --------------------------------------------------------------------------
# generic engine


def _blow_up(step, dt):
    raise BlowUpError(
        f"a path left |x| < {GUARD:g} near t = {step * dt:.6g}; "
        "check the potential with potential.regularity_report"
    )


def run_em(x0, Nm, b, V, c, sigma, force: Potential, cfg: SimConfig, scheme: str = "euler-maruyama",
           force_fn: Optional[Callable] = None) -> PathEnsemble:
    """Euler-Maruyama for ``dX = (sum_r f(Nm_r . X - b_r) V_r + c) dt + sigma dB``.

    ``f`` is ``force.du`` unless ``force_fn`` is given.  Families with a
    compiled kernel run in the compiled loop, anything else in numpy.
    """
    Nm = np.ascontiguousarray(Nm, dtype=float)
    V = np.ascontiguousarray(V, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    c = np.ascontiguousarray(c, dtype=float)
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    d = Nm.shape[1]
    m = sigma.shape[1]
    P = cfg.n_paths
    n = cfg.n_steps
    thin = cfg.thin
    n_rec = n // thin + 1
    x = np.tile(np.asarray(x0, dtype=float).reshape(1, d), (P, 1))
    out = np.empty((P, n_rec, d))
    out[:, 0, :] = x
    S = np.ascontiguousarray(sigma * np.sqrt(cfg.dt))
    compiled = force_fn is None and force.kernel is not None
    fn = force.du if force_fn is None else force_fn
    if compiled:
        code, p0, _ = force.kernel
    for start, block in noise_blocks(cfg.seed, P, n, m):
        if compiled:
            status = _kernels.em_chunk(x, block, Nm, b, V, c, S, cfg.dt, int(code), float(p0),
                                       start, thin, out, GUARD)
            if np.any(status):
                _blow_up(int(status[status > 0].min()), cfg.dt)
        else:
            _numpy_chunk(x, block, Nm, b, V, c, S, cfg.dt, fn, start, thin, out)
    grid = np.arange(n_rec) * (thin * cfg.dt)
    return PathEnsemble(grid, out, int(cfg.seed), scheme, cfg.dt, thin)


def _numpy_chunk(x, block, Nm, b, V, c, S, dt, fn, start, thin, out):
    with np.errstate(over="ignore", invalid="ignore"):
        for s in range(block.shape[1]):
            f = fn(x @ Nm.T - b)
            x += (f @ V + c) * dt + block[:, s, :] @ S.T
            if not np.all(np.abs(x) < GUARD):
                _blow_up(start + s + 1, dt)
            g = start + s + 1
            if g % thin == 0:
                out[:, g // thin, :] = x


# --------------------------------------------------------------------------
# public simulators


def simulate_grbm(spec: GeneratorSpec, cfg: SimConfig) -> PathEnsemble:
    """``X <- X + Omega(X) dt + sigma sqrt(dt) xi`` with ``sigma sigma^T = A``."""
    data = spec.data
    x0 = cfg.start(data.d)
    ens = run_em(x0, data.N, data.b, data.V, -data.mu, sqrt_psd(data.A), spec.U, cfg)
    ens.meta.update({"potential": spec.U.to_dict()})
    return ens


def free_paths(data: ReflectionData, cfg: SimConfig) -> PathEnsemble:
    """The driver ``x0 + sigma B(t) - mu t`` built from the same noise as :func:`simulate_grbm`."""
    return run_em(cfg.start(data.d), data.N, data.b, data.V, -data.mu, sqrt_psd(data.A), zero(), cfg,
                  scheme="free")


def _check_contractive(Q):
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if Q.shape[0] != Q.shape[1]:
        raise ParameterError("Q must be square")
    rho = max(abs(np.linalg.eigvals(np.abs(Q)))) if Q.size else 0.0
    if rho >= 1.0:
        raise IterationDivergenceError(f"spectral radius of |Q| is {rho:.4g} >= 1; the map is not contractive")
    return Q


def skorokhod_reflect(B, Q, cfg: Optional[SimConfig] = None, tol: float = 1e-12,
                      max_iter: int = 10_000) -> PathEnsemble:
    """Harrison-Reiman reflection ``Z = B + (I + Q^T) Y`` of driver paths.

    ``B`` is a :class:`PathEnsemble` or an array ``(paths, steps, d)``; the
    regulator is stored on the result.
    """
    Q = _check_contractive(Q)
    if isinstance(B, PathEnsemble):
        W, grid, seed, dt, thin = B.paths, B.grid, B.seed, B.dt, B.thin
    else:
        W = np.asarray(B, dtype=float)
        if W.ndim == 2:
            W = W[None]
        dt = cfg.dt if cfg else 1.0
        grid = np.arange(W.shape[1]) * dt
        seed = cfg.seed if cfg else -1
        thin = 1
    W = np.ascontiguousarray(W, dtype=float)
    P, T, d = W.shape
    if d != Q.shape[0]:
        raise ParameterError("driver dimension does not match Q")
    Y = np.zeros((P, d))
    Z = np.empty_like(W)
    Yrec = np.empty_like(W)
    worst = _kernels.skorokhod_chunk(W, np.ascontiguousarray(Q), Y, Z, Yrec, tol, max_iter)
    if np.any(worst >= max_iter):
        raise IterationDivergenceError("fixed-point iteration did not converge")
    return PathEnsemble(np.asarray(grid), Z, seed, "skorokhod", dt, thin, regulator=Yrec)


def complementarity_residual(ens: PathEnsemble) -> np.ndarray:
    """Per coordinate ``sum Z_j dY_j / sum dY_j`` (0 when ``Y`` never moves)."""
    Y = ens.regulator
    dY = np.diff(Y, axis=1)
    num = np.sum(np.abs(ens.paths[:, 1:, :]) * dY, axis=(0, 1))
    den = np.sum(dY, axis=(0, 1))
    return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


def ergodic_average(ensemble: PathEnsemble, f: Callable, burn_in: float, n_batches: int = 20) -> dict:
    """Time-and-ensemble average of ``f`` after ``burn_in`` with batch-means stderr.

    ``f`` maps an array ``(..., d)`` of states to values ``(...)``.
    """
    if burn_in >= ensemble.grid[-1] + 1e-12:
        raise ParameterError("burn_in leaves an empty averaging window")
    states = ensemble.after(burn_in)
    vals = np.broadcast_to(np.asarray(f(states), dtype=float), states.shape[:2])
    est, err = batch_means(vals, n_batches)
    return {"estimate": est, "stderr": err}


@dataclass(frozen=True)
class BetaLimitRow:
    beta: float
    sup_distance: float
    ks: float
    ks_exact: float


def beta_limit_compare(data: ReflectionData, betas, cfg: SimConfig, burn_in: Optional[float] = None,
                       path_cfg: Optional[SimConfig] = None) -> list:
    """Soft walls ``U_beta`` against the hard reflection, one row per ``beta``.

    ``sup_distance`` compares the ``U_beta`` path with the Skorokhod image of
    the same driver on ``path_cfg`` (default ``cfg``); ``ks`` compares the
    pooled post-burn-in marginals of face 1 with ``Exp(2 gamma_1)``;
    ``ks_exact`` is the same distance for the exact ``U_beta`` marginal law.
    """
    require_valid(data)
    if data.k != data.d or not np.allclose(data.N, np.eye(data.d)) or np.any(data.b != 0):
        raise ParameterError("the hard-wall comparison needs orthant geometry (N = I, b = 0)")
    if data.kind is Kind.GENERAL:
        rates = 2.0 * gamma_drift(data)
    else:
        rates = 2.0 * delta_drift(data) / data.alpha
    burn = cfg.burn_in if burn_in is None else burn_in
    pcfg = path_cfg or cfg
    hard = skorokhod_reflect(free_paths(data, pcfg), data.Q, pcfg)
    rows = []

    for beta in betas:
        U = beta_exponential(beta)
        spec = GeneratorSpec(data, U)
        soft_path = simulate_grbm(spec, pcfg)
        dist = float(np.max(np.abs(soft_path.paths - hard.paths)))
        stat = simulate_grbm(spec, cfg)
        face = (stat.after(burn) @ data.N.T - data.b)[..., 0]
        ks = ks_statistic(face, expon(scale=1.0 / rates[0]).cdf).D
        exact = _soft_marginal(data, beta)
        ks_exact = ks_statistic(face, exact.cdf).D if exact is not None else float("nan")
        rows.append(BetaLimitRow(float(beta), dist, ks, ks_exact))
    return rows


def _soft_marginal(data, beta) -> Optional[LogGammaLaw]:
    try:
        return product_marginals(data, beta_exponential(beta))[0]
    except (NonIntegrableError, ParameterError, InvalidDataError):
        return None


__all__ = [
    "SimConfig",
    "PathEnsemble",
    "simulate_grbm",
    "free_paths",
    "skorokhod_reflect",
    "complementarity_residual",
    "ergodic_average",
    "beta_limit_compare",
    "BetaLimitRow",
    "run_em",
    "path_streams",
    "noise_blocks",
    "sqrt_psd",
]
