import numpy as np

from gdgesn.graph import Snapshot, TemporalGraph


def random_graph(rng, n_vertices=6, n_steps=5, edge_prob=0.3, signal_prob=0.3, label=0, empty_prob=0.0):
    snaps = []
    iu, ju = np.triu_indices(n_vertices, k=1)
    for _ in range(n_steps):
        signal = rng.random(n_vertices) < signal_prob
        if rng.random() < empty_prob:
            edges = np.empty((0, 2), dtype=np.int64)
        else:
            keep = rng.random(iu.size) < edge_prob
            edges = np.stack([iu[keep], ju[keep]], axis=1)
        snaps.append(Snapshot(signal, edges))
    return TemporalGraph(tuple(snaps), label)


def dense_adjacencies(g):
    return np.stack([s.adjacency() for s in g.snapshots])


def naive_merge(signals, adjs, window):
    """Triple-loop OR over the trailing window, treating t < 0 as empty."""
    n_steps, n = signals.shape
    out_s = np.zeros_like(signals, dtype=bool)
    out_a = np.zeros_like(adjs, dtype=bool)
    for t in range(n_steps):
        for k in range(t - window + 1, t + 1):
            if k < 0:
                continue
            for i in range(n):
                out_s[t, i] |= bool(signals[k, i])
                for j in range(n):
                    out_a[t, i, j] |= bool(adjs[k, i, j])
    return out_s, out_a


def dense_reference_encode(stack, views, initial=None):
    """Straightforward dense evaluation of the grouped, layered recursion."""
    cfg = stack.config
    finals = []
    for g, view in enumerate(views):
        n = view.num_vertices
        xs = [np.zeros((cfg.reservoir_size, n)) if initial is None else np.array(initial[g][l], dtype=float)
              for l in range(cfg.num_layers)]
        for snap in view.snapshots:
            a = snap.adjacency()
            for l in range(cfg.num_layers):
                p = stack.grid[g][l]
                u = snap.signal.astype(float)[None, :] if l == 0 else xs[l - 1]
                xs[l] = cfg.leaking_rate * np.tanh(p.input_weights @ u + p.reservoir_weights @ xs[l] @ a) \
                    + (1 - cfg.leaking_rate) * xs[l]
        finals.append(np.stack(xs))
    return np.stack(finals)
