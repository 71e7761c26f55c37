"""Grouped, layered reservoir encoders driven by dynamic adjacency.

Every encoder ``(g, l)`` updates an ``N_R x N_V`` state matrix as

    X(t) = a * tanh(W_in U(t) + W_res X(t-1) A(t)) + (1 - a) * X(t-1)

where ``U`` is the (merged) vertex signal for the first layer and the
same-step state of the previous layer otherwise.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .graph import DatasetError, Snapshot, TemporalGraph
from .merging import WindowSchedule

__all__ = [
    "SpectralRadiusError",
    "DegenerateDatasetError",
    "EncoderConfig",
    "ReservoirEncoderParams",
    "ReservoirStack",
    "spectral_radius",
    "adjacency_spectral_radii",
    "encoder_seed",
    "init_stack",
    "step",
    "encode_graph",
    "encode_batch",
    "pack_batch",
    "save_stack",
    "load_stack",
]


class SpectralRadiusError(ArithmeticError):
    """Power iteration did not converge; ``estimate`` holds the best value seen."""

    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = estimate


class DegenerateDatasetError(DatasetError):
    pass


@dataclass(frozen=True)
class EncoderConfig:
    reservoir_size: int = 10
    spectral_radius: float = 0.9
    leaking_rate: float = 0.1
    input_scaling: float = 1.0
    density: float = 1.0
    num_layers: int = 1
    num_groups: int = 1
    rng_seed: int = 0
    window_sizes: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.reservoir_size < 1 or self.num_layers < 1 or self.num_groups < 1:
            raise ValueError("reservoir_size, num_layers and num_groups must be >= 1")
        if not 0.0 < self.leaking_rate <= 1.0:
            raise ValueError(f"leaking_rate must lie in (0, 1], got {self.leaking_rate}")
        if not 0.0 < self.density <= 1.0:
            raise ValueError(f"density must lie in (0, 1], got {self.density}")
        if self.spectral_radius <= 0:
            raise ValueError("spectral_radius must be positive")
        if self.input_scaling < 0:
            raise ValueError("input_scaling must be nonnegative")
        if self.window_sizes is not None:
            sizes = tuple(int(w) for w in self.window_sizes)
            if len(sizes) != self.num_groups:
                raise ValueError("window_sizes needs one entry per group")
            object.__setattr__(self, "window_sizes", sizes)

    @property
    def schedule(self) -> WindowSchedule:
        if self.window_sizes is None:
            return WindowSchedule.default(self.num_groups)
        return WindowSchedule(self.window_sizes)

    @property
    def embedding_dim(self) -> int:
        return self.reservoir_size * self.num_groups * self.num_layers

    def replace(self, **changes) -> "EncoderConfig":
        data = asdict(self)
        data.update(changes)
        return EncoderConfig(**data)


@dataclass(frozen=True, eq=False)
class ReservoirEncoderParams:
    input_weights: np.ndarray
    reservoir_weights: np.ndarray


@dataclass(frozen=True, eq=False)
class ReservoirStack:
    """The ``N_G x N_L`` grid of fixed encoders; ``grid[g][l]`` is 0-based."""

    grid: tuple[tuple[ReservoirEncoderParams, ...], ...]
    config: EncoderConfig
    esp_scale_basis: float
    _packed: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        cfg = self.config
        if len(self.grid) != cfg.num_groups or any(len(row) != cfg.num_layers for row in self.grid):
            raise ValueError("grid dimensions do not match the config")

    def layer_arrays(self, group: int):
        """``(w_in_first, w_in_rest, w_res)`` of one group in kernel layout."""
        if not self._packed:
            r = self.config.reservoir_size
            for row in self.grid:
                first = np.ascontiguousarray(row[0].input_weights[:, 0])
                rest = np.ascontiguousarray(
                    np.stack([p.input_weights for p in row[1:]]) if len(row) > 1 else np.zeros((0, r, r))
                )
                res = np.ascontiguousarray(np.stack([p.reservoir_weights for p in row]))
                self._packed.append((first, rest, res))
        return self._packed[group]

    def __eq__(self, other):
        if not isinstance(other, ReservoirStack):
            return NotImplemented
        return (
            self.config == other.config
            and self.esp_scale_basis == other.esp_scale_basis
            and all(
                np.array_equal(a.input_weights, b.input_weights)
                and np.array_equal(a.reservoir_weights, b.reservoir_weights)
                for ra, rb in zip(self.grid, other.grid)
                for a, b in zip(ra, rb)
            )
        )

    __hash__ = None


# ---------------------------------------------------------------------------
# spectral radius
# ---------------------------------------------------------------------------

def spectral_radius(
    matrix,
    tol: float = 1e-10,
    max_iters: int = 20000,
    *,
    restarts: int = 3,
    block: int = 4,
    seed: int = 0,
) -> float:
    """Largest eigenvalue magnitude of a square matrix by power iteration.

    Iterates an orthonormal block of ``block`` vectors so that clusters of
    near-equal magnitude (``+-lambda``, complex conjugate pairs) are
    captured together, and accepts the largest Ritz value whose residual is
    below ``tol``. A stagnating run is restarted from a fresh random block;
    after ``restarts`` failures :class:`SpectralRadiusError` is raised with
    the best estimate.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"spectral_radius needs a square matrix, got shape {m.shape}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = m.shape[0]
    if n == 0:
        return 0.0
    if n == 1:
        return float(abs(m[0, 0]))
    scale = np.linalg.norm(m)
    if scale == 0.0:
        return 0.0

    rng = np.random.default_rng(seed)
    k = max(1, min(n, block))
    per_run = max(1, max_iters // (restarts + 1))
    best = np.nan
    for _ in range(restarts + 1):
        q, _ = np.linalg.qr(rng.standard_normal((n, k)))
        prev = np.nan
        for _ in range(per_run):
            z = m @ q
            if np.linalg.norm(z) <= 1e-14 * scale:
                return 0.0
            h = q.T @ z
            theta, s = np.linalg.eig(h)
            resid = np.linalg.norm(z @ s - q @ s * theta, axis=0)
            ok = resid <= tol * max(1.0, scale)
            mags = np.abs(theta)
            # a converged Ritz value only counts if nothing larger is still moving
            if ok.any() and not np.any(~ok & (mags > mags[ok].max() * (1 + tol))):
                est = float(mags[ok].max())
                best = est
                if abs(est - prev) <= tol * max(1.0, est):
                    return est
                prev = est
            q, _ = np.linalg.qr(z)
        if np.isnan(best):
            best = float(np.abs(theta).max())
    raise SpectralRadiusError(f"power iteration did not converge to tol={tol}", best)


def adjacency_spectral_radii(g: TemporalGraph, tol: float = 1e-9, max_iters: int = 200000) -> np.ndarray:
    """Spectral radius of each snapshot adjacency of ``g`` (0 for empty steps)."""
    ptr, edges = g.packed_edges
    radii, done = kernels.adjacency_radii(ptr, edges, g.num_vertices, float(tol), int(max_iters))
    if not np.all(done):
        bad = int(np.flatnonzero(~done)[0])
        raise SpectralRadiusError(f"adjacency power iteration did not converge at step {bad}", float(radii[bad]))
    return radii


# ---------------------------------------------------------------------------
# initialisation
# ---------------------------------------------------------------------------

def encoder_seed(master_seed: int, group: int, layer: int) -> np.random.SeedSequence:
    """Seed for encoder ``(group, layer)`` (1-based), independent of the grid size."""
    return np.random.SeedSequence([int(master_seed), int(group), int(layer)])


def init_stack(cfg: EncoderConfig, stats) -> ReservoirStack:
    """Draw all encoder weights and rescale each ``W_res`` to ``rho / basis``.

    ``stats`` is a :class:`~gdgesn.graph.DatasetStats` or directly the
    largest adjacency spectral radius the encoders will see.
    """
    basis = float(getattr(stats, "max_adjacency_spectral_radius", stats))
    if not basis > 0:
        raise DegenerateDatasetError("largest adjacency spectral radius is zero (edgeless data)")
    target = cfg.spectral_radius / basis
    r = cfg.reservoir_size
    grid = []
    for g in range(1, cfg.num_groups + 1):
        row = []
        for l in range(1, cfg.num_layers + 1):
            rng = np.random.default_rng(encoder_seed(cfg.rng_seed, g, l))
            n_in = 1 if l == 1 else r
            w_in = rng.uniform(-cfg.input_scaling, cfg.input_scaling, size=(r, n_in))
            w_res = rng.uniform(-1.0, 1.0, size=(r, r))
            if cfg.density < 1.0:
                w_res *= rng.random((r, r)) < cfg.density
            rho = spectral_radius(w_res)
            if rho == 0.0:
                raise ValueError(f"encoder ({g}, {l}) has a nilpotent reservoir; raise the density")
            w_res *= target / rho
            w_in.setflags(write=False)
            w_res.setflags(write=False)
            row.append(ReservoirEncoderParams(w_in, w_res))
        grid.append(tuple(row))
    return ReservoirStack(tuple(grid), cfg, basis)


# ---------------------------------------------------------------------------
# state updates
# ---------------------------------------------------------------------------

def step(params: ReservoirEncoderParams, prev, inputs, adjacency, alpha: float) -> np.ndarray:
    """One leaky update of a single encoder.

    ``adjacency`` is a :class:`Snapshot` or an ``(E, 2)`` undirected edge
    array. The ``X(t-1) A(t)`` product is accumulated edge by edge.
    """
    prev = np.asarray(prev, dtype=float)
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    w_in, w_res = params.input_weights, params.reservoir_weights
    if prev.shape[0] != w_res.shape[0] or inputs.shape != (w_in.shape[1], prev.shape[1]):
        raise ValueError(
            f"shape mismatch: W_in {w_in.shape}, W_res {w_res.shape}, state {prev.shape}, input {inputs.shape}"
        )
    edges = adjacency.edges if isinstance(adjacency, Snapshot) else np.asarray(adjacency, dtype=np.int64).reshape(-1, 2)
    prop = np.zeros_like(prev)
    for i, j in edges:
        prop[:, j] += prev[:, i]
        prop[:, i] += prev[:, j]
    return alpha * np.tanh(w_in @ inputs + w_res @ prop) + (1.0 - alpha) * prev


def pack_batch(graphs: Sequence[TemporalGraph]):
    """Stack graphs side by side into one packed block-diagonal sequence.

    Shorter graphs are left-padded with empty snapshots, which leaves a zero
    initial state at zero, so the final step of the batch is the final step
    of every graph. Returns ``(signals, ptr, edges)``.
    """
    n = graphs[0].num_vertices
    n_steps = max(g.num_timesteps for g in graphs)
    signals = np.zeros((n_steps, n * len(graphs)))
    all_t, all_e = [], []
    for b, g in enumerate(graphs):
        shift = n_steps - g.num_timesteps
        signals[shift:, b * n:(b + 1) * n] = g.signals
        ptr, edges = g.packed_edges
        all_t.append(np.repeat(np.arange(g.num_timesteps) + shift, np.diff(ptr)))
        all_e.append(edges + b * n)
    t_idx = np.concatenate(all_t)
    order = np.argsort(t_idx, kind="stable")
    edges = np.ascontiguousarray(np.concatenate(all_e)[order]) if order.size else np.empty((0, 2), np.int64)
    ptr = np.zeros(n_steps + 1, dtype=np.int64)
    np.cumsum(np.bincount(t_idx, minlength=n_steps), out=ptr[1:])
    return signals, ptr, edges


def _run_group(stack: ReservoirStack, group: int, signals, ptr, edges, x0=None, record=False, backend=None):
    """Run one group; returns states ``(L, R, V)`` (and ``(T, L, R, V)`` if recording)."""
    cfg = stack.config
    first, rest, res = stack.layer_arrays(group)
    n_vert = signals.shape[1]
    shape = (cfg.num_layers, cfg.reservoir_size, n_vert)
    if x0 is None:
        states = np.zeros((cfg.num_layers, n_vert, cfg.reservoir_size))
    else:
        states = np.ascontiguousarray(np.asarray(x0, dtype=float).reshape(shape).transpose(0, 2, 1))
    if record:
        traj = np.zeros((signals.shape[0], cfg.num_layers, n_vert, cfg.reservoir_size))
    else:
        traj = np.zeros((0, 1, 1, 1))
    kern = kernels.get_backend(backend)
    kern.encode(signals, ptr, edges, first, rest, res, float(cfg.leaking_rate), states, traj)
    states = states.transpose(0, 2, 1)
    return (states, traj.transpose(0, 1, 3, 2)) if record else states


def encode_graph(stack: ReservoirStack, views: Sequence[TemporalGraph], *, initial_states=None,
                 return_trajectory: bool = False, backend: str | None = None):
    """Final states of every encoder for one graph.

    ``views`` holds one merged view per group. Returns an array of shape
    ``(N_G, N_L, N_R, N_V)``; with ``return_trajectory`` the per-step states
    ``(N_G, N_T, N_L, N_R, N_V)`` are returned as well. ``initial_states``
    (same shape as the result) defaults to zeros.
    """
    cfg = stack.config
    if len(views) != cfg.num_groups:
        raise ValueError(f"expected {cfg.num_groups} merged views, got {len(views)}")
    finals, trajs = [], []
    for g, view in enumerate(views):
        ptr, edges = view.packed_edges
        signals = view.signals.astype(float)
        x0 = None if initial_states is None else np.asarray(initial_states)[g]
        out = _run_group(stack, g, signals, ptr, edges, x0, return_trajectory, backend)
        if return_trajectory:
            finals.append(out[0])
            trajs.append(out[1])
        else:
            finals.append(out)
    finals = np.stack(finals)
    if return_trajectory:
        return finals, np.stack(trajs)
    return finals


def encode_batch(stack: ReservoirStack, views_by_group: Sequence[Sequence[TemporalGraph]],
                 *, packed=None, backend: str | None = None) -> np.ndarray:
    """Pooled embeddings ``(N_S, N_R * N_G * N_L)`` for a batch of graphs.

    ``views_by_group[g][s]`` is the group-``g`` view of graph ``s``.
    ``packed`` may carry precomputed :func:`pack_batch` output per group.
    """
    cfg = stack.config
    if len(views_by_group) != cfg.num_groups:
        raise ValueError(f"expected {cfg.num_groups} groups of views, got {len(views_by_group)}")
    n_graphs = len(views_by_group[0])
    n = views_by_group[0][0].num_vertices
    blocks = []
    for g in range(cfg.num_groups):
        signals, ptr, edges = packed[g] if packed is not None else pack_batch(views_by_group[g])
        states = _run_group(stack, g, signals, ptr, edges, backend=backend)
        # (L, R, S*V) -> sum over vertices -> (S, L, R)
        pooled = states.reshape(cfg.num_layers, cfg.reservoir_size, n_graphs, n).sum(axis=3)
        blocks.append(pooled.transpose(2, 0, 1))
    return np.stack(blocks, axis=1).reshape(n_graphs, cfg.embedding_dim)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def _stack_arrays(stack: ReservoirStack, prefix: str = "") -> dict:
    arrays = {}
    for g, row in enumerate(stack.grid):
        for l, p in enumerate(row):
            arrays[f"{prefix}w_in_{g}_{l}"] = p.input_weights
            arrays[f"{prefix}w_res_{g}_{l}"] = p.reservoir_weights
    return arrays


def _stack_meta(stack: ReservoirStack) -> dict:
    cfg = asdict(stack.config)
    if cfg["window_sizes"] is not None:
        cfg["window_sizes"] = list(cfg["window_sizes"])
    return {"config": cfg, "esp_scale_basis": stack.esp_scale_basis}


def _stack_from(meta: dict, arrays, prefix: str = "") -> ReservoirStack:
    cfg_data = dict(meta["config"])
    if cfg_data.get("window_sizes") is not None:
        cfg_data["window_sizes"] = tuple(cfg_data["window_sizes"])
    cfg = EncoderConfig(**cfg_data)
    grid = tuple(
        tuple(
            ReservoirEncoderParams(
                np.array(arrays[f"{prefix}w_in_{g}_{l}"]), np.array(arrays[f"{prefix}w_res_{g}_{l}"])
            )
            for l in range(cfg.num_layers)
        )
        for g in range(cfg.num_groups)
    )
    return ReservoirStack(grid, cfg, float(meta["esp_scale_basis"]))


def save_stack(stack: ReservoirStack, path: str | os.PathLike) -> None:
    """Write ``stack`` to an ``.npz`` file (weights stored bit-exactly)."""
    meta = json.dumps(_stack_meta(stack))
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.array(meta), **_stack_arrays(stack))


def load_stack(path: str | os.PathLike) -> ReservoirStack:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        return _stack_from(meta, data)
