"""Snapshot merging: zero padding plus a stride-1 sliding-window logical OR."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graph import Snapshot, TemporalGraph

__all__ = [
    "WindowSchedule",
    "MergedTemporalGraph",
    "pad_sequence",
    "merge",
    "merge_all_groups",
]


@dataclass(frozen=True)
class WindowSchedule:
    """Window size per group; the default is ``2g - 1`` for ``g = 1..num_groups``."""

    window_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(w) for w in self.window_sizes)
        if not sizes:
            raise ValueError("a window schedule needs at least one group")
        if any(w < 1 for w in sizes):
            raise ValueError(f"window sizes must be >= 1, got {sizes}")
        object.__setattr__(self, "window_sizes", sizes)

    @classmethod
    def default(cls, num_groups: int) -> "WindowSchedule":
        if num_groups < 1:
            raise ValueError("num_groups must be >= 1")
        return cls(tuple(2 * g - 1 for g in range(1, num_groups + 1)))

    @property
    def num_groups(self) -> int:
        return len(self.window_sizes)


@dataclass(frozen=True, eq=False)
class MergedTemporalGraph(TemporalGraph):
    window: int = 1
    group_index: int = 1


def _check_window(window: int) -> int:
    if int(window) != window or window < 1:
        raise ValueError(f"window size must be an integer >= 1, got {window!r}")
    return int(window)


def pad_sequence(g: TemporalGraph, window: int) -> list[Snapshot]:
    """Prepend ``window - 1`` empty snapshots, giving length ``N_T + window - 1``."""
    window = _check_window(window)
    nil = Snapshot.empty(g.num_vertices)
    return [nil] * (window - 1) + list(g.snapshots)


def _window_or(rows: np.ndarray, window: int) -> np.ndarray:
    """Row-wise OR over the trailing ``window`` rows, zero before the start."""
    counts = np.cumsum(rows, axis=0, dtype=np.int32)
    counts[window:] -= counts[:-window].copy()
    return counts > 0


# above this many (step, vertex-pair) cells the dense pair mask is skipped
_DENSE_PAIR_LIMIT = 5_000_000


def merge(g: TemporalGraph, window: int, group_index: int = 1) -> MergedTemporalGraph:
    """OR-merge each snapshot with its ``window - 1`` predecessors.

    Steps before the start of the sequence behave as empty snapshots, so the
    output keeps the input length.
    """
    window = _check_window(window)
    if window == 1:
        return MergedTemporalGraph(g.snapshots, g.label, window=1, group_index=group_index)

    n, n_steps = g.num_vertices, g.num_timesteps
    signals = _window_or(g.signals, window)
    ptr, edges = g.packed_edges
    # upper-triangle pair index, increasing in lexicographic (i, j) order
    keys = edges[:, 0] * n - edges[:, 0] * (edges[:, 0] + 1) // 2 + edges[:, 1] - edges[:, 0] - 1
    n_pairs = n * (n - 1) // 2
    snaps = []
    if n_steps * n_pairs <= _DENSE_PAIR_LIMIT:
        present = np.zeros((n_steps, n_pairs), dtype=bool)
        present[np.repeat(np.arange(n_steps), np.diff(ptr)), keys] = True
        merged = _window_or(present, window)
        iu, ju = np.triu_indices(n, k=1)
        for t in range(n_steps):
            idx = np.flatnonzero(merged[t])
            snaps.append(Snapshot._trusted(signals[t], np.stack([iu[idx], ju[idx]], axis=1).astype(np.int64)))
    else:
        per_step = [edges[ptr[t]:ptr[t + 1]] for t in range(n_steps)]
        for t in range(n_steps):
            union = np.unique(np.concatenate(per_step[max(0, t - window + 1): t + 1]), axis=0)
            snaps.append(Snapshot._trusted(signals[t], union.reshape(-1, 2)))
    return MergedTemporalGraph(tuple(snaps), g.label, window=window, group_index=group_index)


def merge_all_groups(g: TemporalGraph, schedule: WindowSchedule | Sequence[int]) -> list[MergedTemporalGraph]:
    if not isinstance(schedule, WindowSchedule):
        schedule = WindowSchedule(tuple(schedule))
    return [merge(g, w, group_index=k + 1) for k, w in enumerate(schedule.window_sizes)]
