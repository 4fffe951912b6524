"""Hot loops of the synchronous round, in two interchangeable backends.

``numba`` runs explicit loops compiled with :func:`gtsaga._accel.njit`;
``numpy`` is a vectorized re-implementation of the same round.  Both mutate
the state arrays in place and return ``(steps_done, bad_norm)``: when an
estimate update produces a non-finite value or a node norm above
``div_limit``, the round is abandoned before anything is committed and
``steps_done`` is the number of completed rounds.

State layout (``n`` nodes, ``N = sum m_i`` components, dimension ``p``):
``X, Y, G`` are ``(n, p)`` estimates, trackers and last SAGA gradients;
``table`` is ``(N, p)``; ``tmean`` is ``(n, p)``; ``Z`` is ``(N, p)`` table
points, or ``(0, p)`` when staleness tracking is off, with ``last_slot`` and
``last_point`` recording the point each node overwrote in its latest round.
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import njit

KIND_QUADRATIC = 0


@njit
def _component_grad(c, x, out, kind, mat, mat_index, vec, label, reg):
    p = x.shape[0]
    if kind[c] == KIND_QUADRATIC:
        A = mat[mat_index[c]]
        for a in range(p):
            s = 0.0
            for b in range(p):
                s += A[a, b] * x[b]
            out[a] = s - vec[c, a]
    else:
        z = 0.0
        for a in range(p):
            z += vec[c, a] * x[a]
        t = -label[c] * z
        if t >= 0.0:
            sg = 1.0 / (1.0 + math.exp(-t))
        else:
            e = math.exp(t)
            sg = e / (1.0 + e)
        coef = -label[c] * sg
        for a in range(p):
            out[a] = coef * vec[c, a] + reg[c] * x[a]


@njit
def _mix_update(W, X, Y, alpha, Xn, Yn, div_limit):
    """Estimate update into ``Xn`` and tracker mixing into ``Yn``; returns the offending norm or -1."""
    n, p = X.shape
    for i in range(n):
        nrm = 0.0
        for a in range(p):
            s = 0.0
            for r in range(n):
                s += W[i, r] * X[r, a]
            v = s - alpha * Y[i, a]
            Xn[i, a] = v
            nrm += v * v
        nrm = math.sqrt(nrm)
        if not (nrm <= div_limit):
            return nrm if math.isfinite(nrm) else math.inf
    for i in range(n):
        for a in range(p):
            s = 0.0
            for r in range(n):
                s += W[i, r] * Y[r, a]
            Yn[i, a] = s
    return -1.0


@njit
def _refresh_means(table, tmean, offsets):
    n, p = tmean.shape
    for i in range(n):
        lo, hi = offsets[i], offsets[i + 1]
        for a in range(p):
            s = 0.0
            for c in range(lo, hi):
                s += table[c, a]
            tmean[i, a] = s / (hi - lo)


@njit
def gtsaga_steps_numba(
    X, Y, G, table, tmean, W, alpha, picks, offsets, kind, mat, mat_index, vec, label, reg,
    k0, refresh_every, Z, last_slot, last_point, div_limit,
):
    n, p = X.shape
    track = Z.shape[0] > 0
    Xn = np.empty_like(X)
    Yn = np.empty_like(Y)
    fresh = np.empty(p)
    for t in range(picks.shape[1]):
        bad = _mix_update(W, X, Y, alpha, Xn, Yn, div_limit)
        if bad >= 0.0:
            return t, bad
        for i in range(n):
            m_i = offsets[i + 1] - offsets[i]
            c = offsets[i] + picks[i, t]
            _component_grad(c, Xn[i], fresh, kind, mat, mat_index, vec, label, reg)
            for a in range(p):
                g = fresh[a] - table[c, a] + tmean[i, a]
                Yn[i, a] += g - G[i, a]
                G[i, a] = g
                tmean[i, a] += (fresh[a] - table[c, a]) / m_i
                table[c, a] = fresh[a]
            if track:
                last_slot[i] = c
                for a in range(p):
                    last_point[i, a] = Z[c, a]
                    Z[c, a] = Xn[i, a]
        X[:, :] = Xn
        Y[:, :] = Yn
        if (k0 + t + 1) % refresh_every == 0:
            _refresh_means(table, tmean, offsets)
    return picks.shape[1], 0.0


@njit
def gt_full_steps_numba(X, Y, G, W, alpha, nsteps, offsets, kind, mat, mat_index, vec, label, reg, div_limit):
    n, p = X.shape
    Xn = np.empty_like(X)
    Yn = np.empty_like(Y)
    fresh = np.empty(p)
    acc = np.empty(p)
    for t in range(nsteps):
        bad = _mix_update(W, X, Y, alpha, Xn, Yn, div_limit)
        if bad >= 0.0:
            return t, bad
        for i in range(n):
            lo, hi = offsets[i], offsets[i + 1]
            acc[:] = 0.0
            for c in range(lo, hi):
                _component_grad(c, Xn[i], fresh, kind, mat, mat_index, vec, label, reg)
                for a in range(p):
                    acc[a] += fresh[a]
            for a in range(p):
                g = acc[a] / (hi - lo)
                Yn[i, a] += g - G[i, a]
                G[i, a] = g
        X[:, :] = Xn
        Y[:, :] = Yn
    return nsteps, 0.0


def _mix_update_numpy(W, X, Y, alpha, div_limit):
    Xn = W @ X - alpha * Y
    norms = np.sqrt(np.einsum("ia,ia->i", Xn, Xn))
    worst = norms.max()
    if not worst <= div_limit:
        return None, None, float(worst) if np.isfinite(worst) else math.inf
    return Xn, W @ Y, -1.0


def gtsaga_steps_numpy(
    X, Y, G, table, tmean, W, alpha, picks, pk,
    k0, refresh_every, Z, last_slot, last_point, div_limit,
):
    """Vectorized counterpart of :func:`gtsaga_steps_numba` (``pk`` is a ``PackedProblem``)."""
    track = Z.shape[0] > 0
    base = pk.offsets[:-1]
    inv_m = 1.0 / pk.sizes[:, None]
    for t in range(picks.shape[1]):
        Xn, Yn, bad = _mix_update_numpy(W, X, Y, alpha, div_limit)
        if bad >= 0.0:
            return t, bad
        flat = base + picks[:, t]
        fresh = pk.gradients(flat, Xn)
        stale = table[flat]
        g = fresh - stale + tmean
        Yn += g - G
        G[...] = g
        tmean += (fresh - stale) * inv_m
        table[flat] = fresh
        if track:
            last_slot[:] = flat
            last_point[...] = Z[flat]
            Z[flat] = Xn
        X[...] = Xn
        Y[...] = Yn
        if (k0 + t + 1) % refresh_every == 0:
            tmean[...] = np.add.reduceat(table, base, axis=0) * inv_m
    return picks.shape[1], 0.0


def gt_full_steps_numpy(X, Y, G, W, alpha, nsteps, pk, div_limit):
    base = pk.offsets[:-1]
    flat = np.arange(pk.offsets[-1])
    for t in range(nsteps):
        Xn, Yn, bad = _mix_update_numpy(W, X, Y, alpha, div_limit)
        if bad >= 0.0:
            return t, bad
        fresh = pk.gradients(flat, np.repeat(Xn, pk.sizes, axis=0))
        g = np.add.reduceat(fresh, base, axis=0) / pk.sizes[:, None]
        Yn += g - G
        G[...] = g
        X[...] = Xn
        Y[...] = Yn
    return nsteps, 0.0


def gtsaga_steps(backend, state_arrays, W, alpha, picks, pk, k0, refresh_every, div_limit):
    X, Y, G, table, tmean, Z, last_slot, last_point = state_arrays
    if backend == "numba":
        return gtsaga_steps_numba(
            X, Y, G, table, tmean, W, alpha, picks, pk.offsets, pk.kind, pk.mat, pk.mat_index,
            pk.vec, pk.label, pk.reg, k0, refresh_every, Z, last_slot, last_point, div_limit,
        )
    return gtsaga_steps_numpy(X, Y, G, table, tmean, W, alpha, picks, pk, k0, refresh_every, Z, last_slot, last_point, div_limit)


def gt_full_steps(backend, X, Y, G, W, alpha, nsteps, pk, div_limit):
    if backend == "numba":
        return gt_full_steps_numba(
            X, Y, G, W, alpha, nsteps, pk.offsets, pk.kind, pk.mat, pk.mat_index, pk.vec, pk.label, pk.reg, div_limit
        )
    return gt_full_steps_numpy(X, Y, G, W, alpha, nsteps, pk, div_limit)
