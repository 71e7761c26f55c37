import itertools

import numpy as np
import pytest

from gdgesn.si import SIConfig, generate_contact_sequence, generate_dataset, run_si


def _fixed_contacts(edge_lists):
    return [np.asarray(e, dtype=np.int64).reshape(-1, 2) for e in edge_lists]


def test_p_zero_keeps_seed_set():
    rng = np.random.default_rng(0)
    contacts = generate_contact_sequence(10, 8, 0.5, rng)
    state = run_si(contacts, 0.0, [3], rng, 10)
    assert state.sum(axis=1).tolist() == [1] * 8
    assert state[:, 3].all()


def test_p_one_on_chain_spreads_one_hop_per_step():
    chain = [[i, i + 1] for i in range(4)]
    contacts = _fixed_contacts([chain] * 5)
    state = run_si(contacts, 1.0, [0], np.random.default_rng(1), 5)
    assert state.sum(axis=1).tolist() == [1, 2, 3, 4, 5]


def test_no_contacts_no_spread():
    contacts = _fixed_contacts([[]] * 6)
    state = run_si(contacts, 1.0, [2], np.random.default_rng(2), 4)
    assert state.sum() == 6


def test_seed_set_required():
    with pytest.raises(ValueError):
        run_si(_fixed_contacts([[]]), 0.5, [], np.random.default_rng(0), 3)


def _exact_final_distribution(contacts, p, seeds, n):
    """Exact law of the final infected set by enumerating every transmission outcome."""
    dist = {frozenset(seeds): 1.0}
    for edges in contacts[1:]:
        nxt = {}
        for infected, prob in dist.items():
            live = [(i, j) for i, j in edges.tolist() if (i in infected) != (j in infected)]
            for outcome in itertools.product((False, True), repeat=len(live)):
                w = prob
                new = set(infected)
                for (i, j), hit in zip(live, outcome):
                    w *= p if hit else 1 - p
                    if hit:
                        new.add(j if i in infected else i)
                key = frozenset(new)
                nxt[key] = nxt.get(key, 0.0) + w
        dist = nxt
    marg = np.zeros(n)
    for infected, prob in dist.items():
        for v in infected:
            marg[v] += prob
    return marg


def test_monte_carlo_matches_exact_probability_tree():
    contacts = _fixed_contacts([[], [[0, 1], [0, 2]], [[1, 3], [2, 3]], [[3, 4], [0, 4]]])
    p = 0.35
    exact = _exact_final_distribution(contacts, p, [0], 5)
    rng = np.random.default_rng(3)
    runs = 20000
    hits = np.zeros(5)
    for _ in range(runs):
        hits += run_si(contacts, p, [0], rng, 5)[-1]
    freq = hits / runs
    se = np.sqrt(np.maximum(exact * (1 - exact), 1e-12) / runs)
    assert np.all(np.abs(freq - exact) <= 3 * se + 1e-12)
    # vertex 3 has two independent chances: 1 - (1 - p^2)^2
    assert exact[3] == pytest.approx(1 - (1 - p * p) ** 2, abs=1e-12)


def test_infection_is_monotone():
    cfg = SIConfig(num_vertices=20, num_timesteps=15, graphs_per_class=10, contact_prob=0.1, rng_seed=4)
    for g in generate_dataset(cfg).graphs:
        s = g.signals
        assert np.all(s[1:] >= s[:-1])


def test_coupled_runs_dominate():
    # the same stream with a larger p infects a superset at every step
    contacts = generate_contact_sequence(25, 20, 0.1, np.random.default_rng(5))
    low = run_si(contacts, 0.2, [0], np.random.default_rng(6), 25)
    high = run_si(contacts, 0.8, [0], np.random.default_rng(6), 25)
    assert np.all(high >= low)


def test_faster_class_infects_more():
    cfg = SIConfig(num_vertices=40, num_timesteps=20, graphs_per_class=60, contact_prob=0.02, rng_seed=7)
    ds = generate_dataset(cfg)
    mean = [np.mean([g.signals[-1].sum() for g in ds.graphs if g.label == k]) for k in (0, 1)]
    assert mean[1] > mean[0]


def test_dataset_shape_and_determinism():
    cfg = SIConfig(num_vertices=12, num_timesteps=9, graphs_per_class=5, infection_probs=(0.1, 0.5, 0.9), rng_seed=8)
    a = generate_dataset(cfg)
    assert len(a) == 15 and a.num_classes == 3
    assert a.labels.tolist() == [0] * 5 + [1] * 5 + [2] * 5
    assert all(g.num_timesteps == 9 and g.num_vertices == 12 for g in a.graphs)
    assert a == generate_dataset(cfg)
    assert a != generate_dataset(SIConfig(**{**cfg.__dict__, "rng_seed": 9}))


def test_initial_infected_count():
    cfg = SIConfig(num_vertices=15, num_timesteps=3, graphs_per_class=4, infection_probs=(0.0,), initial_infected=3)
    for g in generate_dataset(cfg).graphs:
        assert g.signals[0].sum() == 3


def test_contact_edge_mean_within_ci():
    # G(60, 0.1): 1770 pairs, mean 177 edges per step
    rng = np.random.default_rng(10)
    counts = np.array([len(e) for e in generate_contact_sequence(60, 2000, 0.1, rng)])
    se = np.sqrt(1770 * 0.1 * 0.9 / counts.size)
    assert abs(counts.mean() - 177.0) < 4 * se
    edges = np.concatenate(generate_contact_sequence(60, 5, 0.1, rng))
    assert np.all(edges[:, 0] < edges[:, 1])


def test_per_class_contact_probs():
    cfg = SIConfig(num_vertices=30, num_timesteps=10, graphs_per_class=5, contact_prob=(0.01, 0.3), rng_seed=11)
    ds = generate_dataset(cfg)
    sparse = sum(g.total_edges for g in ds.graphs if g.label == 0)
    dense = sum(g.total_edges for g in ds.graphs if g.label == 1)
    assert dense > 10 * sparse


@pytest.mark.parametrize("kwargs", [
    {"graphs_per_class": 0},
    {"infection_probs": (1.5,)},
    {"initial_infected": 0},
    {"contact_prob": (0.1,)},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SIConfig(**kwargs)
