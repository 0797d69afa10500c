"""One-dimensional exponential reflection and the exponential functional of Brownian motion.

``X(t) = log int_0^t exp(W(s) - W(t)) ds`` with ``W(t) = B(t) + mu t`` solves
``dX = -dB + (exp(-X) - mu) dt``; its law at large ``t`` is ``-log(G / 2)``
with ``G ~ Gamma(2 mu)``.
"""
from __future__ import annotations

import numpy as np

from .errors import HorizonError, ParameterError
from .pitman import PathGrid
from .sde import SimConfig, path_streams

_BLOCK = 1024


def _drivers(cfg: SimConfig, mu: float, paths):
    """``W`` on ``0, dt, ..., t_max`` for the listed paths (rows), and the increments."""
    streams = path_streams(cfg.seed, max(paths) + 1)
    n = cfg.n_steps
    dB = np.stack([streams[p].standard_normal(n) for p in paths]) * np.sqrt(cfg.dt)
    t = cfg.dt * np.arange(n + 1)
    W = np.concatenate([np.zeros((len(paths), 1)), np.cumsum(dB, axis=1)], axis=1) + mu * t
    return t, W, dB


def erbm_integral_route(t, W) -> np.ndarray:
    """``log int_0^t exp(W(s) - W(t)) ds`` at ``t[1:]`` (trapezoid from ``t = 0``); rows are paths."""
    W = np.atleast_2d(W)
    cells = np.logaddexp(W[:, :-1], W[:, 1:]) + np.log(np.diff(t) / 2.0)
    logI = np.logaddexp.accumulate(cells, axis=1)
    return logI - W[:, 1:]


def erbm_sde_route(t, dB, mu: float, x_start) -> np.ndarray:
    """Euler-Maruyama for ``dX = -dB + (exp(-X) - mu) dt`` on ``t[1:]`` from ``X(t[1]) = x_start``."""
    dB = np.atleast_2d(dB)
    dt = t[1] - t[0]
    out = np.empty((dB.shape[0], t.size - 1))
    x = np.array(x_start, dtype=float).reshape(-1) * np.ones(dB.shape[0])
    out[:, 0] = x
    for i in range(1, t.size - 1):
        x = x + (np.exp(-x) - mu) * dt - dB[:, i]
        out[:, i] = x
    return out


def _routes(mu, cfg, route, paths):
    t, W, dB = _drivers(cfg, mu, paths)
    X = erbm_integral_route(t, W)
    if not np.all(np.isfinite(X[:, 0])):
        raise ParameterError("integral underflow at the first grid time")
    if route == "sde":
        X = erbm_sde_route(t, dB, mu, X[:, 0])
    elif route != "integral":
        raise ParameterError(f"unknown route {route!r}")
    return t, X


def erbm_path_1d(mu: float, cfg: SimConfig, route: str = "integral", path: int = 0) -> PathGrid:
    """One path of the 1-D exponential reflection on ``dt, 2 dt, ..., t_max``.

    ``route="integral"`` evaluates the closed form; ``route="sde"`` runs
    Euler-Maruyama on the same noise, started from the closed form at ``t = dt``.
    """
    t, X = _routes(mu, cfg, route, [path])
    return PathGrid(t[1:], X[0])


def erbm_terminal_values(mu: float, cfg: SimConfig, route: str = "integral") -> np.ndarray:
    """``X(t_max)`` for ``cfg.n_paths`` independent paths."""
    return _routes(mu, cfg, route, list(range(cfg.n_paths)))[1][:, -1]


def dufresne_sample(mu: float, t_inf: float, n: int, seed: int, dt: float = 5e-3,
                    tail_tol: float = 1e-4) -> np.ndarray:
    """``n`` draws of ``1 / (2 int_0^{t_inf} exp(2 (B(s) - mu s)) ds)``.

    The integral uses the trapezoid rule.  The neglected tail is bounded by
    ``exp(2 (B(t_inf) - mu t_inf)) / (2 mu)``; a sample whose bound exceeds
    ``tail_tol`` times its integral raises :class:`HorizonError`.
    Samples are generated in blocks of 1024, each with its own Philox stream.
    """
    if not mu > 0:
        raise ParameterError("mu must be positive")
    steps = int(round(t_inf / dt))
    if steps < 2:
        raise ParameterError("t_inf must cover at least two steps")
    n_blocks = -(-n // _BLOCK)
    streams = path_streams(seed, n_blocks)
    s = dt * np.arange(steps + 1)
    out = np.empty(n)
    for b, g in enumerate(streams):
        m = min(_BLOCK, n - b * _BLOCK)
        B = np.zeros((m, steps + 1))
        B[:, 1:] = np.cumsum(g.standard_normal((m, steps)) * np.sqrt(dt), axis=1)
        e = np.exp(2.0 * (B - mu * s))
        A = dt * (e.sum(axis=1) - 0.5 * (e[:, 0] + e[:, -1]))
        tail = e[:, -1] / (2.0 * mu)
        if np.any(tail > tail_tol * A):
            raise HorizonError(f"truncation at t_inf={t_inf} leaves a tail above {tail_tol:g} of the integral")
        out[b * _BLOCK: b * _BLOCK + m] = 1.0 / (2.0 * A)
    return out
