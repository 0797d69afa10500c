"""Compiled inner loops for Euler-Maruyama stepping and the discrete Skorokhod map."""
from __future__ import annotations

import math
import os

import numpy as np
from numba import config, njit, prange

if "NUMBA_THREADING_LAYER" not in os.environ:
    # the TBB build found on many systems is too old; avoid the probe warning
    config.THREADING_LAYER = "workqueue"


@njit(cache=True, inline="always")
def _slope(code, p0, y):
    if code == 1:
        return math.exp(-p0 * y)
    if code == 2:
        if y > 0.0:
            e = math.exp(-y)
            return p0 * e / (1.0 + e)
        return p0 / (1.0 + math.exp(y))
    if code == 3:
        return p0
    return 0.0


@njit(cache=True, parallel=True)
def em_chunk(x, noise, Nm, b, V, c, S, dt, code, p0, g0, thin, out, guard):
    """Advance every path over one block of noise, recording every ``thin`` steps.

    ``x`` (paths x d) is updated in place.  The drift is
    ``sum_r U'(Nm[r] . x - b[r]) V[r] + c`` and the increment ``S @ noise``.
    Returns, per path, 0 or the 1-based global step at which the guard tripped.
    """
    P, steps, m = noise.shape
    k, d = Nm.shape
    status = np.zeros(P, dtype=np.int64)
    for p in prange(P):
        xp = x[p].copy()
        drift = np.empty(d)
        for s in range(steps):
            for i in range(d):
                drift[i] = c[i]
            for r in range(k):
                y = -b[r]
                for i in range(d):
                    y += Nm[r, i] * xp[i]
                f = _slope(code, p0, y)
                if f != 0.0:
                    for i in range(d):
                        drift[i] += f * V[r, i]
            bad = False
            for i in range(d):
                inc = 0.0
                for l in range(m):
                    inc += S[i, l] * noise[p, s, l]
                xp[i] += drift[i] * dt + inc
                if not (abs(xp[i]) < guard):
                    bad = True
            g = g0 + s + 1
            if bad:
                status[p] = g
                break
            if g % thin == 0:
                for i in range(d):
                    out[p, g // thin, i] = xp[i]
        for i in range(d):
            x[p, i] = xp[i]
    return status


@njit(cache=True, parallel=True)
def skorokhod_chunk(W, Q, Y, Z, Yrec, tol, max_iter):
    """Discrete Harrison-Reiman map on driver ``W`` (paths x steps x d).

    Per step solves ``Y_j = max(Y_j(prev), -(W_j + sum_r Q[r, j] Y_r))`` by
    fixed-point iteration.  ``Y`` holds the running regulator on entry and
    exit; ``Z`` and ``Yrec`` receive the reflected path and regulator per step.
    Returns, per path, the largest iteration count used (``max_iter`` means
    no convergence).
    """
    P, steps, d = W.shape
    worst = np.zeros(P, dtype=np.int64)
    for p in prange(P):
        yp = Y[p].copy()
        prev = yp.copy()
        new = np.empty(d)
        for s in range(steps):
            for i in range(d):
                prev[i] = yp[i]
            it = 0
            while it < max_iter:
                it += 1
                delta = 0.0
                for j in range(d):
                    w = W[p, s, j]
                    for r in range(d):
                        w += Q[r, j] * yp[r]
                    v = -w
                    if prev[j] > v:
                        v = prev[j]
                    new[j] = v
                for j in range(d):
                    delta = max(delta, abs(new[j] - yp[j]))
                    yp[j] = new[j]
                if delta < tol:
                    break
            if it > worst[p]:
                worst[p] = it
            for j in range(d):
                z = W[p, s, j] + yp[j]
                for r in range(d):
                    z += Q[r, j] * yp[r]
                Z[p, s, j] = z
                Yrec[p, s, j] = yp[j]
        for j in range(d):
            Y[p, j] = yp[j]
    return worst
