"""Discrete-time temporal graphs, datasets and the on-disk dataset format.

A dataset directory holds two files:

``meta.json``
    ``{"name": str, "num_vertices": int, "num_classes": int, "num_graphs": int}``
    plus an optional ``"total_edges"`` used as a load-time cross-check.
``graphs.jsonl``
    one graph per line, ``{"label": int, "snapshots": [{"active": [...],
    "edges": [[i, j], ...]}, ...]}`` with ``i < j`` and snapshots in temporal
    order. Vertices not listed in ``active`` carry signal 0.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DatasetError",
    "DegenerateGraphError",
    "Snapshot",
    "TemporalGraph",
    "Dataset",
    "DatasetStats",
    "load_dataset",
    "save_dataset",
    "filter_empty_snapshots",
    "filter_dataset",
    "compute_stats",
]


class DatasetError(ValueError):
    """Raised for malformed or invalid dataset content."""


class DegenerateGraphError(DatasetError):
    """Raised when a temporal graph has no usable snapshots."""


def _canonical_edges(edges, num_vertices: int | None = None, *, strict: bool = True) -> np.ndarray:
    arr = np.asarray(edges, dtype=np.int64)
    if arr.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DatasetError(f"edges must be an (E, 2) array, got shape {arr.shape}")
    if np.any(arr < 0):
        raise DatasetError("negative vertex id in edge list")
    if num_vertices is not None and np.any(arr >= num_vertices):
        bad = int(arr.max())
        raise DatasetError(f"vertex id {bad} out of range for {num_vertices} vertices")
    if np.any(arr[:, 0] == arr[:, 1]):
        loop = int(arr[arr[:, 0] == arr[:, 1]][0, 0])
        raise DatasetError(f"self-loop ({loop}, {loop}) is not allowed")
    if strict and np.any(arr[:, 0] > arr[:, 1]):
        raise DatasetError("edges must be stored as pairs (i, j) with i < j")
    lo = np.minimum(arr[:, 0], arr[:, 1])
    hi = np.maximum(arr[:, 0], arr[:, 1])
    return np.unique(np.stack([lo, hi], axis=1), axis=0)


@dataclass(frozen=True, eq=False)
class Snapshot:
    """One time step: binary vertex signals and an undirected edge list.

    ``edges`` holds each undirected edge once as ``(i, j)`` with ``i < j``,
    sorted and deduplicated.
    """

    signal: np.ndarray
    edges: np.ndarray

    def __post_init__(self):
        signal = np.asarray(self.signal)
        if signal.ndim != 1:
            raise DatasetError("vertex signal must be a 1-d vector")
        if signal.dtype != bool:
            if not np.all((signal == 0) | (signal == 1)):
                raise DatasetError("vertex signals must be binary")
            signal = signal.astype(bool)
        edges = _canonical_edges(self.edges, signal.shape[0], strict=False)
        signal.setflags(write=False)
        edges.setflags(write=False)
        object.__setattr__(self, "signal", signal)
        object.__setattr__(self, "edges", edges)

    @classmethod
    def _trusted(cls, signal: np.ndarray, edges: np.ndarray) -> "Snapshot":
        # caller guarantees a bool signal and sorted, unique i<j int64 edges
        obj = object.__new__(cls)
        signal.setflags(write=False)
        edges.setflags(write=False)
        object.__setattr__(obj, "signal", signal)
        object.__setattr__(obj, "edges", edges)
        return obj

    @classmethod
    def empty(cls, num_vertices: int) -> "Snapshot":
        return cls(np.zeros(num_vertices, dtype=bool), np.empty((0, 2), dtype=np.int64))

    @classmethod
    def from_dense(cls, signal, adjacency) -> "Snapshot":
        adj = np.asarray(adjacency)
        if not np.array_equal(adj, adj.T):
            raise DatasetError("adjacency must be symmetric")
        i, j = np.nonzero(np.triu(adj, k=1))
        if np.any(np.diag(adj)):
            raise DatasetError("adjacency has self-loops")
        return cls(signal, np.stack([i, j], axis=1))

    @property
    def num_vertices(self) -> int:
        return self.signal.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    def adjacency(self) -> np.ndarray:
        """Dense symmetric 0/1 adjacency matrix."""
        n = self.num_vertices
        adj = np.zeros((n, n))
        adj[self.edges[:, 0], self.edges[:, 1]] = 1.0
        adj[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return adj

    def __eq__(self, other):
        if not isinstance(other, Snapshot):
            return NotImplemented
        return np.array_equal(self.signal, other.signal) and np.array_equal(self.edges, other.edges)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class TemporalGraph:
    snapshots: tuple[Snapshot, ...]
    label: int

    def __post_init__(self):
        snaps = tuple(self.snapshots)
        if not snaps:
            raise DegenerateGraphError("a temporal graph needs at least one snapshot")
        n = snaps[0].num_vertices
        if any(s.num_vertices != n for s in snaps):
            raise DatasetError("all snapshots of a graph must share the vertex count")
        if int(self.label) < 0:
            raise DatasetError(f"negative label {self.label}")
        object.__setattr__(self, "snapshots", snaps)
        object.__setattr__(self, "label", int(self.label))

    @classmethod
    def from_arrays(cls, signals, edge_lists: Sequence, label: int) -> "TemporalGraph":
        """Build from an ``(N_T, N_V)`` signal array and one edge list per step."""
        signals = np.asarray(signals)
        if len(edge_lists) != signals.shape[0]:
            raise DatasetError("need one edge list per time step")
        return cls(tuple(Snapshot(s, e) for s, e in zip(signals, edge_lists)), label)

    @property
    def num_vertices(self) -> int:
        return self.snapshots[0].num_vertices

    @property
    def num_timesteps(self) -> int:
        return len(self.snapshots)

    def __len__(self) -> int:
        return len(self.snapshots)

    @cached_property
    def signals(self) -> np.ndarray:
        """``(N_T, N_V)`` boolean signal matrix."""
        out = np.stack([s.signal for s in self.snapshots])
        out.setflags(write=False)
        return out

    @cached_property
    def packed_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR-style ``(edge_ptr, edges)``: step ``t`` owns ``edges[ptr[t]:ptr[t+1]]``."""
        counts = np.array([s.num_edges for s in self.snapshots], dtype=np.int64)
        ptr = np.zeros(len(counts) + 1, dtype=np.int64)
        np.cumsum(counts, out=ptr[1:])
        edges = np.concatenate([s.edges for s in self.snapshots]) if ptr[-1] else np.empty((0, 2), np.int64)
        ptr.setflags(write=False)
        edges.setflags(write=False)
        return ptr, edges

    @property
    def edge_counts(self) -> np.ndarray:
        return np.diff(self.packed_edges[0])

    @property
    def total_edges(self) -> int:
        return int(self.packed_edges[0][-1])

    def __eq__(self, other):
        if not isinstance(other, TemporalGraph):
            return NotImplemented
        return self.label == other.label and self.snapshots == other.snapshots

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Dataset:
    graphs: tuple[TemporalGraph, ...]
    num_vertices: int
    num_classes: int
    name: str = "dataset"

    def __post_init__(self):
        graphs = tuple(self.graphs)
        if not graphs:
            raise DatasetError("a dataset needs at least one graph")
        if self.num_classes < 1:
            raise DatasetError("num_classes must be positive")
        for k, g in enumerate(graphs):
            if g.num_vertices != self.num_vertices:
                raise DatasetError(
                    f"graph {k} has {g.num_vertices} vertices, dataset declares {self.num_vertices}"
                )
            if g.label >= self.num_classes:
                raise DatasetError(f"graph {k} has label {g.label} >= num_classes {self.num_classes}")
        present = {g.label for g in graphs}
        missing = sorted(set(range(self.num_classes)) - present)
        if missing:
            raise DatasetError(f"classes {missing} have no graphs")
        object.__setattr__(self, "graphs", graphs)

    def __len__(self) -> int:
        return len(self.graphs)

    def __getitem__(self, idx):
        return self.graphs[idx]

    def __iter__(self):
        return iter(self.graphs)

    @property
    def labels(self) -> np.ndarray:
        return np.array([g.label for g in self.graphs], dtype=np.int64)

    @property
    def total_edges(self) -> int:
        return sum(g.total_edges for g in self.graphs)

    def with_labels(self, labels: Iterable[int]) -> "Dataset":
        graphs = tuple(TemporalGraph(g.snapshots, int(y)) for g, y in zip(self.graphs, labels))
        return Dataset(graphs, self.num_vertices, self.num_classes, self.name)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.name == other.name
            and self.num_vertices == other.num_vertices
            and self.num_classes == other.num_classes
            and self.graphs == other.graphs
        )

    __hash__ = None


@dataclass(frozen=True)
class DatasetStats:
    total_edges: int
    max_adjacency_spectral_radius: float
    lengths: tuple[int, ...] = field(default=())

    @property
    def mean_length(self) -> float:
        return float(np.mean(self.lengths)) if self.lengths else 0.0


def _graph_to_record(g: TemporalGraph) -> dict:
    return {
        "label": g.label,
        "snapshots": [
            {"active": np.flatnonzero(s.signal).tolist(), "edges": s.edges.tolist()}
            for s in g.snapshots
        ],
    }


def _record_to_graph(rec: dict, num_vertices: int) -> TemporalGraph:
    if not isinstance(rec, dict) or "label" not in rec or "snapshots" not in rec:
        raise DatasetError("record needs 'label' and 'snapshots'")
    label = rec["label"]
    if not isinstance(label, int) or isinstance(label, bool):
        raise DatasetError(f"label must be an integer, got {label!r}")
    snaps = []
    for snap in rec["snapshots"]:
        active = np.asarray(snap.get("active", []), dtype=np.int64)
        if active.size and (active.min() < 0 or active.max() >= num_vertices):
            raise DatasetError(f"active vertex id out of range for {num_vertices} vertices")
        signal = np.zeros(num_vertices, dtype=bool)
        signal[active] = True
        edges = _canonical_edges(snap.get("edges", []), num_vertices, strict=True)
        snaps.append(Snapshot(signal, edges))
    return TemporalGraph(tuple(snaps), label)


def save_dataset(ds: Dataset, path: str | os.PathLike) -> None:
    """Write ``ds`` to directory ``path`` in the canonical format."""
    if not isinstance(ds, Dataset):
        raise DatasetError("save_dataset expects a Dataset")
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    meta = {
        "name": ds.name,
        "num_vertices": ds.num_vertices,
        "num_classes": ds.num_classes,
        "num_graphs": len(ds),
        "total_edges": ds.total_edges,
    }
    with open(root / "meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(root / "graphs.jsonl", "w", encoding="utf-8") as fh:
        for g in ds.graphs:
            fh.write(json.dumps(_graph_to_record(g), separators=(",", ":")))
            fh.write("\n")


def load_dataset(path: str | os.PathLike) -> Dataset:
    """Read a canonical dataset directory.

    Raises :class:`DatasetError` (with the offending line number for
    ``graphs.jsonl`` problems) on malformed or inconsistent content and
    ``FileNotFoundError`` when either file is missing.
    """
    root = Path(path)
    with open(root / "meta.json", encoding="utf-8") as fh:
        try:
            meta = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"meta.json: {exc}") from exc
    try:
        num_vertices = int(meta["num_vertices"])
        num_classes = int(meta["num_classes"])
        num_graphs = int(meta["num_graphs"])
        name = str(meta["name"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"meta.json: missing or invalid field {exc}") from exc
    if num_vertices < 1:
        raise DatasetError("meta.json: num_vertices must be positive")

    graphs = []
    with open(root / "graphs.jsonl", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"graphs.jsonl line {lineno}: {exc.msg}") from exc
            try:
                graph = _record_to_graph(rec, num_vertices)
            except DatasetError as exc:
                raise type(exc)(f"graphs.jsonl line {lineno}: {exc}") from exc
            if graph.label >= num_classes:
                raise DatasetError(
                    f"graphs.jsonl line {lineno}: unknown label {graph.label} (num_classes={num_classes})"
                )
            graphs.append(graph)
    if len(graphs) != num_graphs:
        raise DatasetError(f"meta.json declares {num_graphs} graphs, graphs.jsonl has {len(graphs)}")
    ds = Dataset(tuple(graphs), num_vertices, num_classes, name)
    if "total_edges" in meta and int(meta["total_edges"]) != ds.total_edges:
        raise DatasetError(
            f"edge count mismatch: meta.json records {meta['total_edges']}, files hold {ds.total_edges}"
        )
    return ds


def filter_empty_snapshots(g: TemporalGraph) -> TemporalGraph:
    """Drop every snapshot without edges, keeping temporal order."""
    kept = tuple(s for s in g.snapshots if s.num_edges > 0)
    if not kept:
        raise DegenerateGraphError("every snapshot of the graph is empty")
    if len(kept) == len(g.snapshots):
        return g
    return TemporalGraph(kept, g.label)


def filter_dataset(ds: Dataset) -> Dataset:
    return Dataset(tuple(filter_empty_snapshots(g) for g in ds.graphs), ds.num_vertices, ds.num_classes, ds.name)


def compute_stats(ds: Dataset, *, tol: float = 1e-9) -> DatasetStats:
    """Edge totals and the largest adjacency spectral radius over all snapshots."""
    from .reservoir import adjacency_spectral_radii

    rho = max(float(adjacency_spectral_radii(g, tol=tol).max()) for g in ds.graphs)
    return DatasetStats(
        total_edges=ds.total_edges,
        max_adjacency_spectral_radius=rho,
        lengths=tuple(g.num_timesteps for g in ds.graphs),
    )
