"""Synthetic dissemination datasets: SI spreading over random temporal contacts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Dataset, TemporalGraph

__all__ = ["SIConfig", "generate_contact_sequence", "run_si", "generate_dataset"]


@dataclass(frozen=True)
class SIConfig:
    """Generator settings; one class per entry of ``infection_probs``.

    ``contact_prob`` is the per-pair, per-step edge probability, either one
    value shared by all classes or one value per class.
    """

    num_vertices: int = 60
    num_timesteps: int = 50
    graphs_per_class: int = 100
    infection_probs: tuple[float, ...] = (0.2, 0.8)
    contact_prob: float | tuple[float, ...] = 0.05
    initial_infected: int = 1
    rng_seed: int = 0
    name: str = "si"

    def __post_init__(self):
        probs = tuple(float(p) for p in self.infection_probs)
        object.__setattr__(self, "infection_probs", probs)
        if isinstance(self.contact_prob, (tuple, list)):
            object.__setattr__(self, "contact_prob", tuple(float(p) for p in self.contact_prob))
            if len(self.contact_prob) != len(probs):
                raise ValueError("need one contact probability per class")
        if self.num_vertices < 1 or self.num_timesteps < 1:
            raise ValueError("num_vertices and num_timesteps must be >= 1")
        if self.graphs_per_class < 1:
            raise ValueError("graphs_per_class must be >= 1")
        if len(probs) < 1:
            raise ValueError("need at least one infection probability")
        if not 1 <= self.initial_infected <= self.num_vertices:
            raise ValueError("initial_infected must lie in [1, num_vertices]")
        for p in probs + self.contact_probs:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability {p} outside [0, 1]")

    @property
    def num_classes(self) -> int:
        return len(self.infection_probs)

    @property
    def contact_probs(self) -> tuple[float, ...]:
        if isinstance(self.contact_prob, tuple):
            return self.contact_prob
        return (float(self.contact_prob),) * len(self.infection_probs)


def generate_contact_sequence(num_vertices: int, num_timesteps: int, contact_prob: float,
                              rng: np.random.Generator) -> list[np.ndarray]:
    """Independent G(n, p) contact graphs, one ``(E, 2)`` edge array per step."""
    iu, ju = np.triu_indices(num_vertices, k=1)
    pairs = np.stack([iu, ju], axis=1).astype(np.int64)
    return [pairs[rng.random(pairs.shape[0]) < contact_prob] for _ in range(num_timesteps)]


def run_si(contacts, p: float, seeds, rng: np.random.Generator, num_vertices: int) -> np.ndarray:
    """Discrete-time SI spreading; returns ``(N_T, N_V)`` boolean infection states.

    Step 0 marks the seed set. At every later step each contact edge draws
    one uniform number (whether or not it can transmit, so runs with
    different ``p`` stay coupled), and an infected-susceptible contact
    transmits when that number is below ``p``. A vertex with ``k`` infected
    contacts is therefore infected with probability ``1 - (1 - p)^k``.
    """
    seeds = np.asarray(seeds, dtype=np.int64)
    if seeds.size == 0:
        raise ValueError("SI needs at least one initially infected vertex")
    n_steps = len(contacts)
    state = np.zeros((n_steps, num_vertices), dtype=bool)
    if n_steps == 0:
        return state
    state[0, seeds] = True
    for t in range(1, n_steps):
        infected = state[t - 1]
        edges = contacts[t]
        u = rng.random(edges.shape[0])
        a, b = infected[edges[:, 0]], infected[edges[:, 1]]
        hit = (a != b) & (u < p)
        new = state[t - 1].copy()
        new[np.where(a[hit], edges[hit, 1], edges[hit, 0])] = True
        state[t] = new
    return state


def generate_dataset(cfg: SIConfig) -> Dataset:
    """``graphs_per_class`` graphs per class, class-major order.

    Graph ``i`` of class ``k`` draws its contacts, seed set and
    transmissions from the stream ``SeedSequence([rng_seed, k, i])``.
    """
    graphs = []
    for k, (p, q) in enumerate(zip(cfg.infection_probs, cfg.contact_probs)):
        for i in range(cfg.graphs_per_class):
            rng = np.random.default_rng(np.random.SeedSequence([cfg.rng_seed, k, i]))
            contacts = generate_contact_sequence(cfg.num_vertices, cfg.num_timesteps, q, rng)
            seeds = rng.choice(cfg.num_vertices, size=cfg.initial_infected, replace=False)
            signals = run_si(contacts, p, seeds, rng, cfg.num_vertices)
            graphs.append(TemporalGraph.from_arrays(signals, contacts, k))
    return Dataset(tuple(graphs), cfg.num_vertices, cfg.num_classes, cfg.name)
