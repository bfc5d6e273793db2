import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphon_games.errors import ConditionViolation, ConfigError
from graphon_games.function_space import GridProfile, make_grid
from graphon_games.graphon import (Constant, CustomKernel, DirectSolve, MinMax, NeumannSeries, NormalizedPowerLaw,
                                   PowerLaw, SimpleThreshold, StepMatrix, WattsStrogatz, apply, cut_norm_bounds,
                                   discretize, eigen_decompose, eval_graphon, hs_norm, operator_norm,
                                   read_graph_csv, resolvent_apply, sample_bernoulli, sample_graph,
                                   sample_weighted, step_graphon_from_matrix, write_graph_csv)

FAMILIES = [Constant(0.7), StepMatrix(((0.9, 0.1, 0.3), (0.1, 0.5, 0.2), (0.3, 0.2, 0.8))), PowerLaw(0.2),
            NormalizedPowerLaw(0.3), MinMax(), SimpleThreshold(), WattsStrogatz(0.25, 0.3)]


def test_evaluate_examples():
    assert eval_graphon(MinMax(), 0.25, 0.5) == 0.125
    assert eval_graphon(SimpleThreshold(), 0.3, 0.6) == 1.0
    assert eval_graphon(SimpleThreshold(), 0.6, 0.6) == 0.0
    assert eval_graphon(Constant(2.5), 0.1, 0.9) == 2.5
    with pytest.raises(ConfigError):
        eval_graphon(MinMax(), 1.2, 0.5)
    with pytest.raises(ConfigError):
        eval_graphon(PowerLaw(0.2), 0.0, 0.5)


def test_family_validation():
    with pytest.raises(ConfigError):
        PowerLaw(0.4)
    with pytest.raises(ConfigError):
        NormalizedPowerLaw(0.6)
    with pytest.raises(ConfigError):
        StepMatrix(((1.0, 0.2), (0.3, 1.0)))
    with pytest.raises(ConfigError):
        WattsStrogatz(1.5, 0.1)
    assert NormalizedPowerLaw(0.3).g == pytest.approx(0.49)


def test_discretize_examples():
    assert np.array_equal(discretize(Constant(0.3), make_grid(2)).kernel, np.full((2, 2), 0.3))
    W = ((0.9, 0.1), (0.1, 0.4))
    A = discretize(StepMatrix(W), make_grid(4)).kernel
    assert np.array_equal(A, np.repeat(np.repeat(np.array(W), 2, 0), 2, 1))
    assert np.allclose(discretize(MinMax(), make_grid(2)).kernel, [[0.1875, 0.0625], [0.0625, 0.1875]], atol=1e-16)


def test_apply_examples():
    g = make_grid(64)
    one = GridProfile.constant(g, 1.0)
    assert np.allclose(apply(discretize(Constant(0.4), g), one).values, 0.4, atol=1e-15)
    assert np.array_equal(apply(discretize(MinMax(), g), GridProfile.constant(g, 0.0)).values, np.zeros(64))
    g = make_grid(4096)
    for rule, tol in (("midpoint", 5e-3), ("adapted", 1e-10)):
        r = apply(discretize(PowerLaw(0.2), g, rule), GridProfile.constant(g, 1.0))
        exact = g.points ** -0.2 / 0.8
        assert np.max(np.abs(r.values - exact)) <= tol


def test_operator_norm_examples():
    g = make_grid(1024)
    assert operator_norm(discretize(Constant(-0.6), g)) == pytest.approx(0.6, abs=1e-10)
    assert abs(operator_norm(discretize(MinMax(), g)) - 1 / math.pi**2) <= 1e-4
    assert operator_norm(discretize(PowerLaw(0.2), g)) <= 1 / 0.6 + 1e-9
    assert operator_norm(discretize(PowerLaw(0.2), make_grid(4096), "adapted")) == pytest.approx(1 / 0.6, abs=1e-6)


def test_hs_norm_examples():
    assert hs_norm(Constant(-0.3), make_grid(16)) == pytest.approx(0.3)
    assert abs(hs_norm(PowerLaw(0.2), make_grid(4096)) - 5 / 3) <= 2e-2
    assert abs(hs_norm(SimpleThreshold(), make_grid(1024)) - 1 / math.sqrt(2)) <= 1e-3


def test_resolvent_examples():
    g = make_grid(128)
    phi = GridProfile.from_function(g, np.sin)
    op = discretize(Constant(1.0), g)
    assert resolvent_apply(op, 0.0, phi) is phi
    r = resolvent_apply(op, 1 / 3, GridProfile.constant(g, 1.0))
    assert np.allclose(r.values, 1.5, atol=1e-13)
    with pytest.raises(ConditionViolation):
        resolvent_apply(op, 1.2, phi, NeumannSeries())
    with pytest.raises(ConditionViolation):
        resolvent_apply(op, 1.0, phi, DirectSolve())


def test_eigen_examples():
    g = make_grid(256)
    lam, phis = eigen_decompose(discretize(Constant(0.8), g), 3)
    assert lam[0] == pytest.approx(0.8) and np.allclose(lam[1:], 0, atol=1e-12)
    W = np.array([[0.9, 0.2, 0.1], [0.2, 0.5, 0.3], [0.1, 0.3, 0.7]])
    lam, _ = eigen_decompose(discretize(step_graphon_from_matrix(W), make_grid(12)), 5)
    expected = np.concatenate([np.linalg.eigvalsh(W) / 3, np.zeros(2)])
    assert np.allclose(np.sort(lam), np.sort(expected), atol=1e-12)
    lam, phis = eigen_decompose(discretize(MinMax(), g), 2)
    op = discretize(MinMax(), g)
    assert op.integrate(phis[0].values ** 2) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        eigen_decompose(op, 0)


def test_sampling_examples():
    g = sample_weighted(Constant(0.3), 20, 1)
    off = g.W[~np.eye(20, dtype=bool)]
    assert np.all(off == 0.3) and np.all(np.diag(g.W) == 0)
    b = sample_bernoulli(Constant(0.5), 400, 2)
    assert set(np.unique(b.W)) <= {0.0, 1.0}
    assert abs(b.W.sum() / (400 * 399) - 0.5) <= 0.05
    assert np.all(np.diff(b.latent) >= 0)
    with pytest.raises(ConfigError):
        sample_bernoulli(Constant(2.0), 10, 0)
    with pytest.raises(ConfigError):
        sample_graph(Constant(0.5), 10, 0, "poisson")


def test_step_graphon_examples():
    assert eval_graphon(step_graphon_from_matrix([[0.4]]), 0.3, 0.9) == 0.4
    W = [[0.8, 0.1], [0.1, 0.6]]
    s = step_graphon_from_matrix(W)
    assert [[eval_graphon(s, x, y) for y in (0.25, 0.75)] for x in (0.25, 0.75)] == W


def test_cut_norm_examples():
    g = make_grid(64)
    assert cut_norm_bounds(MinMax(), MinMax(), g) == (0.0, 0.0)
    lo, hi = cut_norm_bounds(Constant(0.7), Constant(0.2), g, 4)
    assert lo == pytest.approx(0.5) and hi == pytest.approx(0.5)
    with pytest.raises(ValueError):
        cut_norm_bounds(MinMax(), Constant(0.1), g, 1)


def test_graph_csv_round_trip(tmp_path):
    g = sample_weighted(WattsStrogatz(0.3, 0.2), 25, 9)
    write_graph_csv(g, tmp_path / "g.csv")
    h = read_graph_csv(tmp_path / "g.csv")
    assert np.array_equal(g.W, h.W) and np.array_equal(g.latent, h.latent) and h.kind == "weighted"


def test_adapted_threshold_and_ws_cells_have_exact_row_mass():
    g = make_grid(200)
    op = discretize(SimpleThreshold(), g, "adapted")
    # cell averages integrate the row exactly: int_0^1 1{x+y<=1} dy = 1 - x
    assert np.allclose(op.matrix.sum(axis=1), 1 - g.points, atol=1e-14)
    w = WattsStrogatz(0.3, 0.25)
    op = discretize(w, g, "adapted")
    assert np.allclose(op.matrix.sum(axis=1), w.near * w.p + w.far * (1 - w.p), atol=1e-12)


@pytest.mark.parametrize("w", FAMILIES, ids=lambda w: w.tag)
@pytest.mark.parametrize("rule", ["midpoint", "adapted"])
def test_symmetry_and_norm_sandwich(w, rule):
    op = discretize(w, make_grid(96), rule)
    assert np.array_equal(op.kernel, op.kernel.T)
    assert operator_norm(op) <= hs_norm(op) + 1e-8


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(FAMILIES[:2] + FAMILIES[4:]), st.floats(-0.9, 0.9), st.integers(0, 2**31))
def test_resolvent_methods_agree(w, frac, seed):
    op = discretize(w, make_grid(48))
    theta = frac / operator_norm(op)
    phi = GridProfile(op.grid, np.random.default_rng(seed).normal(size=48))
    a = resolvent_apply(op, theta, phi, NeumannSeries())
    b = resolvent_apply(op, theta, phi, DirectSolve())
    assert np.max(np.abs(a.values - b.values)) <= 1e-9 * (1 + np.max(np.abs(b.values)))
    resid = b.values - theta * apply(op, b).values - phi.values
    assert np.max(np.abs(resid)) <= 1e-9


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(["weighted", "bernoulli"]), st.integers(1, 40), st.integers(0, 2**31))
def test_sampling_deterministic(kind, N, seed):
    a = sample_graph(MinMax(), N, seed, kind)
    b = sample_graph(MinMax(), N, seed, kind)
    assert np.array_equal(a.W, b.W) and np.array_equal(a.latent, b.latent)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 5), st.integers(0, 2**31))
def test_step_discretization_is_block_replication(K, c, seed):
    A = np.random.default_rng(seed).random((K, K))
    W = (A + A.T) / 2
    op = discretize(step_graphon_from_matrix(W), make_grid(c * K))
    assert np.array_equal(op.kernel, np.repeat(np.repeat(W, c, 0), c, 1))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_cut_bounds_ordered(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.random((2, 3, 3))
    w1 = step_graphon_from_matrix((a + a.T) / 2)
    w2 = step_graphon_from_matrix((b + b.T) / 2)
    lo, hi = cut_norm_bounds(w1, w2, make_grid(36), 6)
    assert 0 <= lo <= hi + 1e-15


def test_custom_kernel():
    w = CustomKernel(lambda x, y: np.exp(-abs(x - y)), "laplace", unit_range=True)
    op = discretize(w, make_grid(32))
    assert op.kernel[0, 0] == 1.0 and w.bounded01()
    assert sample_bernoulli(w, 10, 0).N == 10
