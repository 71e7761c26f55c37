import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gdgesn import kernels
from gdgesn.graph import Snapshot, TemporalGraph
from gdgesn.merging import merge_all_groups
from gdgesn.reservoir import (
    DegenerateDatasetError,
    EncoderConfig,
    ReservoirEncoderParams,
    SpectralRadiusError,
    adjacency_spectral_radii,
    encode_batch,
    encode_graph,
    init_stack,
    load_stack,
    pack_batch,
    save_stack,
    spectral_radius,
    step,
)
from helpers import dense_reference_encode, random_graph

BACKENDS = ["numpy"] + (["numba"] if kernels.NUMBA_AVAILABLE else [])


def _eig_radius(m):
    return float(np.abs(np.linalg.eigvals(m)).max())


# --- spectral radius -------------------------------------------------------

def test_radius_diagonal():
    assert spectral_radius(np.diag([3.0, -1.0])) == pytest.approx(3.0, abs=1e-8)


def test_radius_rotation_pair():
    # eigenvalues +-i, equal magnitude
    assert spectral_radius(np.array([[0.0, 1.0], [-1.0, 0.0]])) == pytest.approx(1.0, abs=1e-8)


def test_radius_plus_minus_pair():
    assert spectral_radius(np.diag([2.0, -2.0, 0.5])) == pytest.approx(2.0, abs=1e-8)


def test_radius_zero_and_nilpotent():
    assert spectral_radius(np.zeros((4, 4))) == 0.0
    assert spectral_radius(np.triu(np.ones((5, 5)), 1)) == pytest.approx(0.0, abs=1e-6)


def test_radius_rejects_nonsquare():
    with pytest.raises(ValueError):
        spectral_radius(np.ones((2, 3)))


def test_radius_error_carries_estimate():
    m = np.random.default_rng(0).uniform(-1, 1, (10, 10))
    with pytest.raises(SpectralRadiusError) as info:
        spectral_radius(m, tol=1e-15, max_iters=4, restarts=0)
    assert np.isfinite(info.value.estimate)


@pytest.mark.parametrize("seed", range(40))
def test_radius_matches_eigvals_on_reservoir_draws(seed):
    m = np.random.default_rng(seed).uniform(-1, 1, (10, 10))
    assert spectral_radius(m) == pytest.approx(_eig_radius(m), abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 25), st.integers(0, 2**32 - 1))
def test_radius_property(n, seed):
    m = np.random.default_rng(seed).standard_normal((n, n))
    assert spectral_radius(m) == pytest.approx(_eig_radius(m), rel=1e-7, abs=1e-8)


# --- adjacency radii -------------------------------------------------------

def _graph_of(edge_lists, n):
    return TemporalGraph(tuple(Snapshot(np.zeros(n, bool), e) for e in edge_lists), 0)


def test_adjacency_radius_path_and_star():
    path = [[i, i + 1] for i in range(7)]
    star = [[0, j] for j in range(1, 8)]
    radii = adjacency_spectral_radii(_graph_of([path, star, []], 8))
    assert radii[0] == pytest.approx(2 * np.cos(np.pi / 9), abs=1e-8)
    assert radii[1] == pytest.approx(np.sqrt(7), abs=1e-8)
    assert radii[2] == 0.0


@pytest.mark.parametrize("backend", BACKENDS)
def test_adjacency_radii_match_eigvalsh(backend):
    rng = np.random.default_rng(1)
    for trial in range(15):
        n = int(rng.integers(2, 30))
        g = random_graph(rng, n, 6, edge_prob=rng.random() * 0.5, empty_prob=0.2)
        ptr, edges = g.packed_edges
        radii, done = kernels.get_backend(backend).adjacency_radii(ptr, edges, n, 1e-10, 200000)
        assert done.all()
        expected = [np.abs(np.linalg.eigvalsh(s.adjacency())).max() for s in g.snapshots]
        np.testing.assert_allclose(radii, expected, atol=1e-8)


def test_adjacency_bipartite_components():
    # two disjoint components with different radii, one bipartite
    edges = [[0, 1], [1, 2], [2, 3], [4, 5], [5, 6], [4, 6]]
    (r,) = adjacency_spectral_radii(_graph_of([edges], 7))
    assert r == pytest.approx(2.0, abs=1e-8)


# --- initialisation --------------------------------------------------------

def test_init_scales_to_target():
    cfg = EncoderConfig(reservoir_size=10, spectral_radius=0.9, num_groups=2, num_layers=2, rng_seed=3)
    stack = init_stack(cfg, 3.0)
    for row in stack.grid:
        for p in row:
            assert _eig_radius(p.reservoir_weights) == pytest.approx(0.3, abs=1e-8)
    assert stack.grid[0][0].input_weights.shape == (10, 1)
    assert stack.grid[0][1].input_weights.shape == (10, 10)


def test_init_input_scaling_bounds():
    stack = init_stack(EncoderConfig(input_scaling=0.25, num_layers=3), 1.0)
    for p in stack.grid[0]:
        assert np.abs(p.input_weights).max() <= 0.25


def test_init_density_mask():
    stack = init_stack(EncoderConfig(reservoir_size=60, density=0.2, rng_seed=5), 1.0)
    frac = np.count_nonzero(stack.grid[0][0].reservoir_weights) / 3600
    assert 0.15 < frac < 0.25


def test_init_deterministic_and_seed_sensitive():
    cfg = EncoderConfig(num_groups=2, num_layers=2, rng_seed=9)
    assert init_stack(cfg, 2.0) == init_stack(cfg, 2.0)
    assert init_stack(cfg, 2.0) != init_stack(cfg.replace(rng_seed=10), 2.0)


def test_init_existing_encoders_stable_when_grid_grows():
    small = init_stack(EncoderConfig(num_groups=1, num_layers=2, rng_seed=4), 1.5)
    big = init_stack(EncoderConfig(num_groups=3, num_layers=4, rng_seed=4), 1.5)
    for l in range(2):
        assert np.array_equal(small.grid[0][l].reservoir_weights, big.grid[0][l].reservoir_weights)
        assert np.array_equal(small.grid[0][l].input_weights, big.grid[0][l].input_weights)


def test_init_edgeless_rejected():
    with pytest.raises(DegenerateDatasetError):
        init_stack(EncoderConfig(), 0.0)


def test_config_validation():
    with pytest.raises(ValueError):
        EncoderConfig(leaking_rate=0.0)
    with pytest.raises(ValueError):
        EncoderConfig(density=1.5)
    with pytest.raises(ValueError):
        EncoderConfig(num_groups=2, window_sizes=(1,))
    assert EncoderConfig(num_groups=3, num_layers=2, reservoir_size=10).embedding_dim == 60


# --- single step -----------------------------------------------------------

def test_step_hand_computed():
    p = ReservoirEncoderParams(np.ones((1, 1)), np.zeros((1, 1)))
    out = step(p, np.zeros((1, 1)), np.ones((1, 1)), np.empty((0, 2)), alpha=1.0)
    assert out[0, 0] == pytest.approx(np.tanh(1.0), abs=1e-12)
    assert out[0, 0] == pytest.approx(0.76159, abs=1e-5)


def test_step_leak_only():
    p = ReservoirEncoderParams(np.zeros((2, 1)), np.eye(2))
    prev = np.array([[0.5, -0.2, 0.1]]).repeat(2, axis=0)
    out = step(p, prev, np.zeros((1, 3)), np.empty((0, 2)), alpha=0.1)
    np.testing.assert_allclose(out, 0.9 * prev + 0.1 * np.tanh(0.0), atol=1e-15)


def test_step_edge_propagation_matches_dense():
    rng = np.random.default_rng(2)
    g = random_graph(rng, 7, 1, edge_prob=0.5)
    snap = g.snapshots[0]
    p = ReservoirEncoderParams(rng.uniform(-1, 1, (4, 1)), rng.uniform(-1, 1, (4, 4)))
    prev = rng.uniform(-1, 1, (4, 7))
    u = snap.signal.astype(float)[None]
    expected = 0.3 * np.tanh(p.input_weights @ u + p.reservoir_weights @ prev @ snap.adjacency()) + 0.7 * prev
    np.testing.assert_allclose(step(p, prev, u, snap, 0.3), expected, atol=1e-13)
    np.testing.assert_allclose(step(p, prev, u, snap.edges, 0.3), expected, atol=1e-13)


def test_step_shape_mismatch():
    p = ReservoirEncoderParams(np.ones((3, 1)), np.eye(3))
    with pytest.raises(ValueError):
        step(p, np.zeros((2, 4)), np.zeros((1, 4)), [], 0.5)


# --- full encoding ---------------------------------------------------------

def _setup(seed, groups=2, layers=2, n=8, t=7, r=5):
    rng = np.random.default_rng(seed)
    cfg = EncoderConfig(reservoir_size=r, num_groups=groups, num_layers=layers, leaking_rate=0.4, rng_seed=seed)
    g = random_graph(rng, n, t, edge_prob=0.3, signal_prob=0.4, empty_prob=0.2)
    views = merge_all_groups(g, cfg.schedule)
    return cfg, init_stack(cfg, 2.5), views


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("seed", range(6))
def test_encode_matches_dense_oracle(backend, seed):
    cfg, stack, views = _setup(seed, groups=1 + seed % 3, layers=1 + seed % 4)
    got = encode_graph(stack, views, backend=backend)
    np.testing.assert_allclose(got, dense_reference_encode(stack, views), atol=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_encode_nonzero_initial_state(backend):
    cfg, stack, views = _setup(11)
    x0 = np.random.default_rng(0).uniform(-1, 1, (2, 2, 5, 8))
    got = encode_graph(stack, views, initial_states=x0, backend=backend)
    np.testing.assert_allclose(got, dense_reference_encode(stack, views, initial=x0), atol=1e-12)


def test_trajectory_last_step_is_final():
    cfg, stack, views = _setup(12)
    final, traj = encode_graph(stack, views, return_trajectory=True)
    assert traj.shape == (2, 7, 2, 5, 8)
    np.testing.assert_array_equal(traj[:, -1], final)


@pytest.mark.skipif(not kernels.NUMBA_AVAILABLE, reason="numba not installed")
def test_backends_agree_on_batch():
    rng = np.random.default_rng(13)
    cfg = EncoderConfig(num_groups=3, num_layers=3, rng_seed=1)
    stack = init_stack(cfg, 3.0)
    graphs = [random_graph(rng, 10, int(rng.integers(3, 12)), edge_prob=0.2) for _ in range(20)]
    per = [merge_all_groups(g, cfg.schedule) for g in graphs]
    vbg = [[v[k] for v in per] for k in range(3)]
    a = encode_batch(stack, vbg, backend="numpy")
    b = encode_batch(stack, vbg, backend="numba")
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_batch_equals_per_graph_encoding():
    rng = np.random.default_rng(14)
    cfg = EncoderConfig(reservoir_size=6, num_groups=2, num_layers=2, rng_seed=2)
    stack = init_stack(cfg, 2.0)
    graphs = [random_graph(rng, 7, int(rng.integers(1, 10)), edge_prob=0.3) for _ in range(9)]
    per = [merge_all_groups(g, cfg.schedule) for g in graphs]
    batch = encode_batch(stack, [[v[k] for v in per] for k in range(2)])
    for s, views in enumerate(per):
        single = encode_graph(stack, views).sum(axis=3).reshape(-1)
        np.testing.assert_allclose(batch[s], single, atol=1e-12)


def test_embedding_order_group_then_layer():
    cfg, stack, views = _setup(15, groups=2, layers=3)
    finals = encode_graph(stack, views)
    emb = encode_batch(stack, [[v] for v in views])[0]
    for g in range(2):
        for l in range(3):
            block = emb[(g * 3 + l) * 5:(g * 3 + l + 1) * 5]
            np.testing.assert_allclose(block, finals[g, l].sum(axis=1), atol=1e-12)


def test_pack_batch_left_pads():
    rng = np.random.default_rng(16)
    short = random_graph(rng, 4, 2, edge_prob=0.8)
    long = random_graph(rng, 4, 5, edge_prob=0.8)
    signals, ptr, edges = pack_batch([short, long])
    assert signals.shape == (5, 8)
    assert not signals[:3, :4].any()
    np.testing.assert_array_equal(signals[3:, :4], short.signals)
    for t in range(3):
        seg = edges[ptr[t]:ptr[t + 1]]
        assert np.all(seg >= 4)
    assert ptr[-1] == short.total_edges + long.total_edges


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 1.0))
def test_states_bounded(seed, alpha):
    rng = np.random.default_rng(seed)
    cfg = EncoderConfig(reservoir_size=4, num_layers=2, leaking_rate=alpha, spectral_radius=3.0,
                        input_scaling=5.0, rng_seed=seed % 1000)
    g = random_graph(rng, 6, 8, edge_prob=0.6)
    _, traj = encode_graph(init_stack(cfg, 1.0), merge_all_groups(g, cfg.schedule), return_trajectory=True)
    assert np.abs(traj).max() <= 1.0 + 1e-12


def test_echo_state_contraction():
    # two very different initial states converge on a long, connected input
    rng = np.random.default_rng(17)
    cfg = EncoderConfig(num_layers=2)
    g = random_graph(rng, 10, 300, edge_prob=0.3)
    views = merge_all_groups(g, cfg.schedule)
    stack = init_stack(cfg, float(adjacency_spectral_radii(g).max()))
    x_a = encode_graph(stack, views, initial_states=np.ones((1, 2, 10, 10)))
    x_b = encode_graph(stack, views, initial_states=-np.ones((1, 2, 10, 10)))
    assert np.abs(x_a - x_b).max() < 1e-6


def test_stack_round_trip(tmp_path):
    cfg = EncoderConfig(num_groups=2, num_layers=3, density=0.5, window_sizes=(1, 4), rng_seed=21)
    stack = init_stack(cfg, 1.7)
    save_stack(stack, tmp_path / "s.npz")
    back = load_stack(tmp_path / "s.npz")
    assert back == stack
    assert back.config.window_sizes == (1, 4)


@pytest.mark.parametrize("flag,expected", [("1", "numpy"), ("0", "numba" if kernels.NUMBA_AVAILABLE else "numpy")])
def test_env_flag_selects_backend(flag, expected):
    import os
    import subprocess
    import sys

    env = dict(os.environ, GDGESN_DISABLE_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", "from gdgesn import kernels; print(kernels.backend_name())"],
                         env=env, capture_output=True, text=True, check=True).stdout.strip()
    assert out == expected


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")
