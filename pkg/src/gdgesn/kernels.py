"""Hot loops of the encoder and of the adjacency spectral-radius sweep.

Each kernel exists twice: a numba ``@njit`` version and a pure-numpy
version with identical semantics. The numba path is used when numba is
importable and ``GDGESN_DISABLE_NUMBA`` is unset (or ``0``); the numpy path
is always available through :func:`get_backend`.

Packed graph layout shared by all kernels:

* ``signals``  float64 ``(T, V)`` vertex inputs,
* ``ptr``      int64 ``(T + 1,)`` so that step ``t`` owns ``edges[ptr[t]:ptr[t+1]]``,
* ``edges``    int64 ``(E, 2)`` undirected edges, each stored once.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

__all__ = ["NUMBA_AVAILABLE", "USE_NUMBA", "get_backend", "encode", "adjacency_radii", "backend_name"]

NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and os.environ.get("GDGESN_DISABLE_NUMBA", "0").lower() in ("", "0", "false", "no")


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def encode_numpy(signals, ptr, edges, w_in_first, w_in_rest, w_res, alpha, states, traj):
    """Run the leaky reservoir recursion in place.

    ``states`` is vertex-major ``(L, V, R)``; ``traj`` is either empty or
    ``(T, L, V, R)`` and then receives every intermediate state.
    """
    n_steps = signals.shape[0]
    n_layers, n_vert, n_res = states.shape
    record = traj.shape[0] > 0
    for t in range(n_steps):
        step_edges = edges[ptr[t]:ptr[t + 1]]
        # both directions of every edge, grouped by receiving vertex
        rows = np.concatenate([step_edges[:, 1], step_edges[:, 0]])
        cols = np.concatenate([step_edges[:, 0], step_edges[:, 1]])
        order = np.argsort(rows, kind="stable")
        rows, cols = rows[order], cols[order]
        if rows.size:
            starts = np.flatnonzero(np.r_[True, rows[1:] != rows[:-1]])
            receivers = rows[starts]
        for layer in range(n_layers):
            x = states[layer]
            prop = np.zeros((n_vert, n_res))
            if rows.size:
                prop[receivers] = np.add.reduceat(x[cols], starts, axis=0)
            pre = prop @ w_res[layer].T
            if layer == 0:
                pre += np.outer(signals[t], w_in_first)
            else:
                pre += states[layer - 1] @ w_in_rest[layer - 1].T
            states[layer] = alpha * np.tanh(pre) + (1.0 - alpha) * x
            if record:
                traj[t, layer] = states[layer]
    return states


def adjacency_radii_numpy(ptr, edges, n_vert, tol, max_iters):
    """Spectral radius of every snapshot adjacency, all steps iterated together.

    Power iteration on ``A + I`` from the all-ones vector. For a nonnegative
    symmetric matrix and a positive iterate the Rayleigh quotient and the
    Collatz-Wielandt ratio bracket the Perron root, so the loop stops once the
    bracket is narrower than ``tol``. Returns ``(radii, converged)``.
    """
    n_steps = ptr.shape[0] - 1
    radii = np.zeros(n_steps)
    done = np.ones(n_steps, dtype=bool)
    counts = np.diff(ptr)
    active = np.flatnonzero(counts > 0)
    if active.size == 0:
        return radii, done
    done[active] = False
    tidx = np.repeat(np.arange(n_steps), counts)
    # rows are time steps; only the still-running ones are iterated
    x = np.full((n_steps, n_vert), 1.0 / np.sqrt(n_vert))
    lo = np.zeros(n_steps)
    hi = np.full(n_steps, np.inf)
    src, dst = edges[:, 0], edges[:, 1]
    for _ in range(max_iters):
        y = x.copy()
        np.add.at(y, (tidx, src), x[tidx, dst])
        np.add.at(y, (tidx, dst), x[tidx, src])
        rq = np.einsum("tv,tv->t", x, y) / np.einsum("tv,tv->t", x, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(x > 0, y / x, -np.inf)
        cw = ratio.max(axis=1)
        lo = np.where(done, lo, rq)
        hi = np.where(done, hi, cw)
        newly = ~done & (hi - lo <= tol * np.maximum(1.0, lo))
        done |= newly
        if done.all():
            break
        x = y / np.linalg.norm(y, axis=1, keepdims=True)
    radii[active] = 0.5 * (lo[active] + hi[active]) - 1.0
    return radii, done


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if NUMBA_AVAILABLE:

    @numba.njit(cache=True, nogil=True)
    def encode_numba(signals, ptr, edges, w_in_first, w_in_rest, w_res, alpha, states, traj):
        n_steps = signals.shape[0]
        n_layers, n_vert, n_res = states.shape
        record = traj.shape[0] > 0
        prop = np.empty((n_layers, n_vert, n_res))
        w_res_t = np.empty((n_layers, n_res, n_res))
        for layer in range(n_layers):
            w_res_t[layer] = w_res[layer].T
        w_in_t = np.empty((max(n_layers - 1, 0), n_res, n_res))
        for layer in range(n_layers - 1):
            w_in_t[layer] = w_in_rest[layer].T
        for t in range(n_steps):
            # X(t-1) A(t) for every layer in one pass over the edges
            prop[:, :, :] = 0.0
            for e in range(ptr[t], ptr[t + 1]):
                i = edges[e, 0]
                j = edges[e, 1]
                for layer in range(n_layers):
                    for r in range(n_res):
                        prop[layer, j, r] += states[layer, i, r]
                        prop[layer, i, r] += states[layer, j, r]
            for layer in range(n_layers):
                x = states[layer]
                pre = np.dot(prop[layer], w_res_t[layer])
                if layer == 0:
                    for v in range(n_vert):
                        s = signals[t, v]
                        if s != 0.0:
                            for r in range(n_res):
                                pre[v, r] += w_in_first[r] * s
                else:
                    pre += np.dot(states[layer - 1], w_in_t[layer - 1])
                for v in range(n_vert):
                    for r in range(n_res):
                        x[v, r] = alpha * np.tanh(pre[v, r]) + (1.0 - alpha) * x[v, r]
                if record:
                    traj[t, layer] = x
        return states

    @numba.njit(cache=True, nogil=True)
    def adjacency_radii_numba(ptr, edges, n_vert, tol, max_iters):
        n_steps = ptr.shape[0] - 1
        radii = np.zeros(n_steps)
        done = np.ones(n_steps, dtype=np.bool_)
        x = np.empty(n_vert)
        y = np.empty(n_vert)
        for t in range(n_steps):
            e0 = ptr[t]
            e1 = ptr[t + 1]
            if e1 == e0:
                continue
            done[t] = False
            x[:] = 1.0 / np.sqrt(n_vert)
            lo = 0.0
            hi = np.inf
            for _ in range(max_iters):
                for v in range(n_vert):
                    y[v] = x[v]
                for e in range(e0, e1):
                    i = edges[e, 0]
                    j = edges[e, 1]
                    y[i] += x[j]
                    y[j] += x[i]
                num = 0.0
                den = 0.0
                cw = -np.inf
                for v in range(n_vert):
                    num += x[v] * y[v]
                    den += x[v] * x[v]
                    if x[v] > 0.0:
                        q = y[v] / x[v]
                        if q > cw:
                            cw = q
                lo = num / den
                hi = cw
                if hi - lo <= tol * max(1.0, lo):
                    done[t] = True
                    break
                norm = 0.0
                for v in range(n_vert):
                    norm += y[v] * y[v]
                norm = np.sqrt(norm)
                for v in range(n_vert):
                    x[v] = y[v] / norm
            radii[t] = 0.5 * (lo + hi) - 1.0
        return radii, done

else:  # pragma: no cover
    encode_numba = None
    adjacency_radii_numba = None


_BACKENDS = {
    "numpy": SimpleNamespace(name="numpy", encode=encode_numpy, adjacency_radii=adjacency_radii_numpy),
}
if NUMBA_AVAILABLE:
    _BACKENDS["numba"] = SimpleNamespace(name="numba", encode=encode_numba, adjacency_radii=adjacency_radii_numba)


def get_backend(name: str | None = None) -> SimpleNamespace:
    """Kernel namespace for ``name`` (``"numba"``/``"numpy"``), or the active one."""
    if name is None:
        name = "numba" if USE_NUMBA else "numpy"
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {sorted(_BACKENDS)}") from None


def backend_name() -> str:
    return get_backend().name


def encode(*args):
    return get_backend().encode(*args)


def adjacency_radii(*args):
    return get_backend().adjacency_radii(*args)
