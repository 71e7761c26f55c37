"""Cross-validated evaluation with repeated reservoir initialisations.

Run ``r`` of fold ``f`` draws its reservoir with seed
``run_seed(master_seed, f, r)``, so any single cell or run can be repeated
in isolation and evaluation order never changes the numbers.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .graph import Dataset
from .merging import merge
from .readout import fit, predict
from .reservoir import EncoderConfig, adjacency_spectral_radii, encode_batch, init_stack, pack_batch

__all__ = [
    "CVProtocol",
    "SweepGrid",
    "CellResult",
    "RunReport",
    "EncodingCache",
    "accuracy",
    "make_folds",
    "run_seed",
    "run_cv",
    "run_sweep",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CVProtocol:
    num_folds: int = 10
    num_random_inits: int = 20
    master_seed: int = 0
    shuffle: bool = True
    gamma: float = 1e-3
    jobs: int = 1

    def __post_init__(self):
        if self.num_folds < 2:
            raise ValueError("cross-validation needs at least 2 folds")
        if self.num_random_inits < 1:
            raise ValueError("num_random_inits must be >= 1")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")


@dataclass(frozen=True)
class SweepGrid:
    layers: tuple[int, ...] = (1, 2, 3, 4)
    groups: tuple[int, ...] = (1, 2, 3)

    def __post_init__(self):
        layers, groups = tuple(int(x) for x in self.layers), tuple(int(x) for x in self.groups)
        if not layers or not groups:
            raise ValueError("sweep ranges must be nonempty")
        if min(layers) < 1 or min(groups) < 1:
            raise ValueError("layer and group counts must be >= 1")
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "groups", groups)

    def cells(self) -> list[tuple[int, int]]:
        """``(num_groups, num_layers)`` pairs, groups-major."""
        return [(g, l) for g in self.groups for l in self.layers]


def accuracy(predictions, truths) -> float:
    """Percentage of positions where prediction equals truth."""
    p = np.asarray(predictions)
    y = np.asarray(truths)
    if p.shape != y.shape:
        raise ValueError("predictions and truths differ in length")
    if p.size == 0:
        raise ValueError("accuracy of an empty prediction set is undefined")
    return 100.0 * float(np.count_nonzero(p == y)) / p.size


def make_folds(ds: Dataset | int, proto: CVProtocol) -> list[tuple[np.ndarray, np.ndarray]]:
    """Partition sample indices into ``num_folds`` contiguous test blocks.

    With ``shuffle`` the indices are permuted once with ``master_seed`` first.
    Block sizes differ by at most one.
    """
    n = ds if isinstance(ds, int) else len(ds)
    if n < proto.num_folds:
        raise ValueError(f"{n} samples cannot fill {proto.num_folds} folds")
    order = np.arange(n)
    if proto.shuffle:
        order = np.random.default_rng(proto.master_seed).permutation(n)
    folds = []
    for test in np.array_split(order, proto.num_folds):
        mask = np.ones(n, dtype=bool)
        mask[test] = False
        folds.append((np.flatnonzero(mask), np.sort(test)))
    return folds


def run_seed(master_seed: int, fold: int, init: int) -> int:
    """Reservoir seed of run ``init`` on fold ``fold`` (both 0-based)."""
    return int(np.random.SeedSequence([int(master_seed), int(fold), int(init)]).generate_state(1)[0])


class EncodingCache:
    """Merged views, packed batches and adjacency radii of a dataset, per window.

    Fill it with :meth:`prepare` before sharing it between threads.
    """

    def __init__(self, ds: Dataset):
        self.dataset = ds
        self.labels = ds.labels
        self._views: dict[int, list] = {}
        self._packed: dict[int, tuple] = {}
        self._radii: dict[int, np.ndarray] = {}

    def prepare(self, windows: Sequence[int]) -> None:
        for w in windows:
            if w in self._views:
                continue
            views = [merge(g, w) for g in self.dataset.graphs]
            self._views[w] = views
            self._packed[w] = pack_batch(views)
            self._radii[w] = np.array([adjacency_spectral_radii(v).max() for v in views])

    def views(self, windows: Sequence[int]) -> list[list]:
        self.prepare(windows)
        return [self._views[w] for w in windows]

    def packed(self, windows: Sequence[int]) -> list[tuple]:
        self.prepare(windows)
        return [self._packed[w] for w in windows]

    def esp_basis(self, indices, windows: Sequence[int]) -> float:
        """Largest adjacency spectral radius over the given graphs and windows."""
        self.prepare(windows)
        idx = np.asarray(indices)
        return float(max(self._radii[w][idx].max() for w in windows))


@dataclass
class CellResult:
    num_groups: int
    num_layers: int
    mean: float
    std: float
    runs: list = field(default_factory=list)  # (fold, init, seed, accuracy)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunReport:
    config: dict
    protocol: dict
    cells: list[CellResult]
    dataset: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    def cell(self, num_groups: int, num_layers: int) -> CellResult:
        for c in self.cells:
            if c.num_groups == num_groups and c.num_layers == num_layers:
                return c
        raise KeyError((num_groups, num_layers))

    @property
    def mean(self) -> float:
        if len(self.cells) != 1:
            raise ValueError("mean is only defined for single-cell reports")
        return self.cells[0].mean

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "dataset": self.dataset,
            "config": self.config,
            "protocol": self.protocol,
            "cells": [c.to_dict() for c in self.cells],
        }
        if include_timing:
            out["timing"] = self.timing
        return out

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        lines = ["num_groups,num_layers,mean,std"]
        lines += [f"{c.num_groups},{c.num_layers},{c.mean:.6f},{c.std:.6f}" for c in self.cells]
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        """Config echo followed by a layers x groups table of mean (std) accuracy."""
        lines = [f"dataset: {self.dataset.get('name', '?')}  graphs={self.dataset.get('num_graphs', '?')}"]
        lines.append("config: " + ", ".join(f"{k}={v}" for k, v in sorted(self.config.items())))
        lines.append("protocol: " + ", ".join(f"{k}={v}" for k, v in sorted(self.protocol.items())))
        groups = sorted({c.num_groups for c in self.cells})
        layers = sorted({c.num_layers for c in self.cells})
        width = 16
        lines.append("")
        lines.append("accuracy % mean (std)")
        lines.append("N_L \\ N_G".ljust(10) + "".join(f"N_G={g}".rjust(width) for g in groups))
        for l in layers:
            row = f"N_L={l}".ljust(10)
            for g in groups:
                try:
                    c = self.cell(g, l)
                    row += f"{c.mean:.2f} ({c.std:.2f})".rjust(width)
                except KeyError:
                    row += "-".rjust(width)
            lines.append(row)
        if self.timing:
            lines.append("")
            lines.append("timing [s]: " + ", ".join(f"{k}={v:.3f}" for k, v in sorted(self.timing.items())))
        return "\n".join(lines) + "\n"


def _one_run(cache: EncodingCache, cfg: EncoderConfig, train, test, seed: int, gamma: float, timing: dict):
    windows = cfg.schedule.window_sizes
    basis = cache.esp_basis(train, windows)
    stack = init_stack(cfg.replace(rng_seed=seed), basis)
    t0 = time.perf_counter()
    emb = encode_batch(stack, cache.views(windows), packed=cache.packed(windows))
    t1 = time.perf_counter()
    model = fit(emb[train], cache.labels[train], gamma, cache.dataset.num_classes)
    t2 = time.perf_counter()
    _, pred = predict(model, emb[test])
    timing["encode"] = timing.get("encode", 0.0) + (t1 - t0)
    timing["readout"] = timing.get("readout", 0.0) + (t2 - t1)
    return accuracy(pred, cache.labels[test])


def _run_cell(cache: EncodingCache, cfg: EncoderConfig, proto: CVProtocol, folds, timing: dict) -> CellResult:
    jobs = [
        (f, r, run_seed(proto.master_seed, f, r), train, test)
        for f, (train, test) in enumerate(folds)
        for r in range(proto.num_random_inits)
    ]

    def work(job):
        f, r, seed, train, test = job
        local: dict = {}
        acc = _one_run(cache, cfg, train, test, seed, proto.gamma, local)
        return (f, r, seed, acc), local

    if proto.jobs > 1:
        with ThreadPoolExecutor(max_workers=proto.jobs) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(j) for j in jobs]
    runs = [res for res, _ in results]
    for _, local in results:
        for k, v in local.items():
            timing[k] = timing.get(k, 0.0) + v
    accs = np.array([a for *_, a in runs])
    log.info("N_G=%d N_L=%d: %.2f%% +- %.2f", cfg.num_groups, cfg.num_layers, accs.mean(), accs.std())
    return CellResult(cfg.num_groups, cfg.num_layers, float(accs.mean()), float(accs.std()), [list(r) for r in runs])


def _config_echo(cfg: EncoderConfig, proto: CVProtocol) -> dict:
    echo = asdict(cfg)
    echo.pop("rng_seed")
    echo["window_sizes"] = list(cfg.schedule.window_sizes)
    echo["gamma"] = proto.gamma
    return echo


def _protocol_echo(proto: CVProtocol) -> dict:
    echo = asdict(proto)
    echo.pop("gamma")
    echo.pop("jobs")
    return echo


def _dataset_echo(ds: Dataset) -> dict:
    return {"name": ds.name, "num_graphs": len(ds), "num_vertices": ds.num_vertices,
            "num_classes": ds.num_classes, "total_edges": ds.total_edges}


def run_cv(ds: Dataset, cfg: EncoderConfig, proto: CVProtocol = CVProtocol(), *,
           cache: EncodingCache | None = None) -> RunReport:
    """Mean and std test accuracy over every fold x initialisation run."""
    timing: dict = {}
    t0 = time.perf_counter()
    cache = cache or EncodingCache(ds)
    cache.prepare(cfg.schedule.window_sizes)
    timing["prepare"] = time.perf_counter() - t0
    cell = _run_cell(cache, cfg, proto, make_folds(ds, proto), timing)
    timing["total"] = time.perf_counter() - t0
    return RunReport(_config_echo(cfg, proto), _protocol_echo(proto), [cell], _dataset_echo(ds), timing)


def run_sweep(ds: Dataset, base_cfg: EncoderConfig, grid: SweepGrid = SweepGrid(),
              proto: CVProtocol = CVProtocol(), *, cache: EncodingCache | None = None) -> RunReport:
    """:func:`run_cv` for every ``(N_G, N_L)`` cell of ``grid``.

    ``base_cfg.window_sizes`` must be unset; each cell uses the default
    window schedule for its group count.
    """
    if base_cfg.window_sizes is not None:
        raise ValueError("run_sweep derives window sizes per cell; leave window_sizes unset")
    timing: dict = {}
    t0 = time.perf_counter()
    cache = cache or EncodingCache(ds)
    cache.prepare(EncoderConfig(num_groups=max(grid.groups)).schedule.window_sizes)
    timing["prepare"] = time.perf_counter() - t0
    folds = make_folds(ds, proto)
    cells = [
        _run_cell(cache, base_cfg.replace(num_groups=g, num_layers=l), proto, folds, timing)
        for g, l in grid.cells()
    ]
    timing["total"] = time.perf_counter() - t0
    echo = _config_echo(base_cfg, proto)
    for key in ("num_groups", "num_layers", "window_sizes"):
        echo.pop(key)
    echo["grid"] = {"groups": list(grid.groups), "layers": list(grid.layers)}
    return RunReport(echo, _protocol_echo(proto), cells, _dataset_echo(ds), timing)
