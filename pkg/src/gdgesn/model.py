"""End-to-end classifier: merge, encode, pool, ridge readout."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graph import TemporalGraph
from .merging import merge_all_groups
from .readout import ReadoutModel, fit, predict
from .reservoir import (
    EncoderConfig,
    ReservoirStack,
    _stack_arrays,
    _stack_from,
    _stack_meta,
    adjacency_spectral_radii,
    encode_batch,
    init_stack,
)

__all__ = ["GDGESN", "save_model", "load_model"]


def _views_by_group(graphs: Sequence[TemporalGraph], cfg: EncoderConfig):
    per_graph = [merge_all_groups(g, cfg.schedule) for g in graphs]
    return [[views[k] for views in per_graph] for k in range(cfg.num_groups)]


@dataclass
class GDGESN:
    """Fixed grouped reservoirs with a trained linear readout.

    Usage::

        clf = GDGESN(EncoderConfig(num_groups=3, num_layers=2)).fit(train_graphs)
        labels = clf.predict(test_graphs)
    """

    config: EncoderConfig
    gamma: float = 1e-3
    stack: ReservoirStack | None = None
    readout: ReadoutModel | None = None

    def embed(self, graphs: Sequence[TemporalGraph]) -> np.ndarray:
        if self.stack is None:
            raise RuntimeError("model is not fitted")
        return encode_batch(self.stack, _views_by_group(graphs, self.config))

    def fit(self, graphs: Sequence[TemporalGraph], labels=None, num_classes: int | None = None) -> "GDGESN":
        graphs = list(graphs)
        labels = np.array([g.label for g in graphs]) if labels is None else np.asarray(labels)
        views = _views_by_group(graphs, self.config)
        basis = max(float(adjacency_spectral_radii(v).max()) for group in views for v in group)
        self.stack = init_stack(self.config, basis)
        emb = encode_batch(self.stack, views)
        self.readout = fit(emb, labels, self.gamma, num_classes)
        return self

    def decision_function(self, graphs: Sequence[TemporalGraph]) -> np.ndarray:
        if self.readout is None:
            raise RuntimeError("model is not fitted")
        return predict(self.readout, self.embed(graphs))[0]

    def predict(self, graphs: Sequence[TemporalGraph]) -> np.ndarray:
        if self.readout is None:
            raise RuntimeError("model is not fitted")
        return predict(self.readout, self.embed(graphs))[1]


def save_model(model: GDGESN, path: str | os.PathLike) -> None:
    """Reservoir weights, readout and config in one ``.npz`` file."""
    if model.stack is None or model.readout is None:
        raise RuntimeError("only fitted models can be saved")
    meta = _stack_meta(model.stack)
    meta["gamma"] = model.gamma
    meta["readout"] = {"gamma": model.readout.gamma, "num_classes": model.readout.num_classes}
    arrays = _stack_arrays(model.stack, prefix="stack/")
    arrays["readout/weights"] = model.readout.weights
    arrays["readout/bias"] = model.readout.bias
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.array(json.dumps(meta)), **arrays)


def load_model(path: str | os.PathLike) -> GDGESN:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        stack = _stack_from(meta, data, prefix="stack/")
        readout = ReadoutModel(
            np.array(data["readout/weights"]),
            np.array(data["readout/bias"]),
            float(meta["readout"]["gamma"]),
            int(meta["readout"]["num_classes"]),
        )
    return GDGESN(stack.config, float(meta["gamma"]), stack, readout)
