"""Sum-pooling, embedding assembly and the closed-form ridge readout."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "SingularSystemError",
    "ReadoutModel",
    "sum_pool",
    "build_embedding",
    "one_hot",
    "fit",
    "predict",
]


class SingularSystemError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True, eq=False)
class ReadoutModel:
    weights: np.ndarray  # (N_Y, D)
    bias: np.ndarray  # (N_Y,)
    gamma: float
    num_classes: int

    @property
    def input_dim(self) -> int:
        return self.weights.shape[1]


def sum_pool(states) -> np.ndarray:
    """Sum the vertex columns of an ``N_R x N_V`` state matrix."""
    return np.asarray(states, dtype=float).sum(axis=-1)


def build_embedding(final_states) -> np.ndarray:
    """Concatenate sum-pooled final states in ``(g, l)`` row-major order.

    ``final_states`` is either an array ``(N_G, N_L, N_R, N_V)`` or a mapping
    from 1-based ``(g, l)`` to ``N_R x N_V`` matrices covering the full grid;
    the mapping's insertion order is irrelevant.
    """
    if isinstance(final_states, Mapping):
        keys = sorted(final_states)
        n_groups = max(g for g, _ in keys)
        n_layers = max(l for _, l in keys)
        expected = [(g, l) for g in range(1, n_groups + 1) for l in range(1, n_layers + 1)]
        if keys != expected:
            missing = sorted(set(expected) - set(keys))
            raise ValueError(f"embedding grid is incomplete or mis-indexed; missing {missing}")
        return np.concatenate([sum_pool(final_states[k]) for k in expected])
    arr = np.asarray(final_states, dtype=float)
    if arr.ndim != 4:
        raise ValueError(f"expected (N_G, N_L, N_R, N_V) final states, got shape {arr.shape}")
    return arr.sum(axis=3).reshape(-1)


def one_hot(labels, num_classes: int) -> np.ndarray:
    """``(N_Y, N_S)`` target matrix, one column per sample."""
    labels = np.asarray(labels, dtype=np.int64)
    y = np.zeros((num_classes, labels.size))
    y[labels, np.arange(labels.size)] = 1.0
    return y


def fit(embeddings, labels, gamma: float = 1e-3, num_classes: int | None = None,
        *, fit_intercept: bool = True) -> ReadoutModel:
    """Ridge readout ``W = Y C^T (C C^T + gamma I)^-1``.

    ``embeddings`` is ``(N_S, D)`` (one row per sample). With
    ``fit_intercept`` a constant-1 feature is appended and its weight
    column becomes the bias, so the bias is regularised like any other weight.
    """
    emb = np.asarray(embeddings, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    if emb.ndim != 2 or emb.shape[0] != labels.size:
        raise ValueError("embeddings must be (N_S, D) with one label per row")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    if num_classes is None:
        num_classes = int(labels.max()) + 1
    if labels.min() < 0 or labels.max() >= num_classes:
        raise ValueError("labels out of range")

    c = emb.T
    if fit_intercept:
        c = np.vstack([c, np.ones((1, c.shape[1]))])
    y = one_hot(labels, num_classes)
    gram = c @ c.T + gamma * np.eye(c.shape[0])
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        hint = " (gamma=0 needs full-rank embeddings; use gamma > 0)" if gamma == 0 else ""
        raise SingularSystemError(f"readout normal equations are not positive definite{hint}") from exc
    diag = np.abs(np.diag(factor[0]))
    if (diag.min() / diag.max()) ** 2 < gram.shape[0] * np.finfo(float).eps:
        raise SingularSystemError(
            "readout normal equations are numerically singular; use gamma > 0 or fewer features"
        )
    w = scipy.linalg.cho_solve(factor, c @ y.T).T
    if fit_intercept:
        weights, bias = w[:, :-1], w[:, -1]
    else:
        weights, bias = w, np.zeros(num_classes)
    return ReadoutModel(np.ascontiguousarray(weights), np.ascontiguousarray(bias), float(gamma), num_classes)


def predict(model: ReadoutModel, embedding):
    """Scores ``W c + b`` and the argmax class (lowest index on ties).

    Accepts one embedding ``(D,)`` or a batch ``(N, D)``.
    """
    c = np.asarray(embedding, dtype=float)
    if c.shape[-1] != model.input_dim:
        raise ValueError(f"embedding has dimension {c.shape[-1]}, model expects {model.input_dim}")
    scores = c @ model.weights.T + model.bias
    return scores, np.argmax(scores, axis=-1)
