import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphon_games.function_space import (IDENTITY, SORT_VALUES, Grid, GridProfile, PermutationSearch,
                                          block_average, embed_step, exhaustive_blocks, integrate, l2_dist,
                                          l2_norm, make_grid, perm_invariant_dist, read_profile_csv,
                                          write_profile_csv)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@pytest.mark.parametrize("M, pts", [(1, [0.5]), (2, [0.25, 0.75]), (4, [0.125, 0.375, 0.625, 0.875])])
def test_midpoints(M, pts):
    assert np.array_equal(make_grid(M).points, pts)


def test_bad_grid():
    with pytest.raises(ValueError):
        Grid(0)
    with pytest.raises(ValueError):
        GridProfile(make_grid(3), np.ones(4))
    with pytest.raises(ValueError):
        GridProfile(make_grid(2), np.array([1.0, np.nan]))


def test_integrate_examples():
    assert integrate(GridProfile.constant(make_grid(8), 1.0)) == 1.0
    assert integrate(GridProfile(make_grid(2), np.array([0.0, 1.0]))) == 0.5
    p = GridProfile.from_function(make_grid(1000), lambda x: x)
    assert abs(integrate(p) - 0.5) <= 1e-12


def test_norm_examples():
    assert l2_norm(GridProfile.constant(make_grid(5), 1.0)) == pytest.approx(1.0, abs=1e-15)
    p = GridProfile.from_function(make_grid(1000), lambda x: x)
    assert l2_dist(p, p) == 0.0
    assert abs(l2_norm(p) - 1 / np.sqrt(3)) <= 1e-6


def test_grid_mismatch_rejected():
    with pytest.raises(ValueError):
        l2_dist(GridProfile.constant(make_grid(2), 1.0), GridProfile.constant(make_grid(4), 1.0))


def test_embed_and_average_examples():
    assert np.array_equal(embed_step([1, 2], 4).values, [1, 1, 2, 2])
    assert np.array_equal(embed_step([3, 1, 2], 6).values, [3, 3, 1, 1, 2, 2])
    assert np.array_equal(embed_step([7.0], 5).values, np.full(5, 7.0))
    assert np.array_equal(block_average(embed_step([1, 2], 4), 2), [1, 2])
    assert np.array_equal(block_average(GridProfile.constant(make_grid(9), 5.0), 3), [5, 5, 5])
    avg = block_average(GridProfile.from_function(make_grid(1000), lambda x: x), 2)
    assert np.allclose(avg, [0.25, 0.75], atol=1e-12)
    with pytest.raises(ValueError):
        embed_step([1, 2], 5)
    with pytest.raises(ValueError):
        block_average(GridProfile.constant(make_grid(5), 1.0), 2)


def test_perm_dist_examples():
    p = embed_step([1, 2], 8)
    q = embed_step([2, 1], 8)
    assert perm_invariant_dist(p, p, IDENTITY) == 0
    assert perm_invariant_dist(p, q, SORT_VALUES) == 0
    assert perm_invariant_dist(embed_step([0, 1, 2], 6), embed_step([2, 0, 1], 6), exhaustive_blocks(3)) == 0
    with pytest.raises(ValueError):
        perm_invariant_dist(GridProfile.from_function(make_grid(6), lambda x: x), p := embed_step([0, 1, 2], 6),
                            exhaustive_blocks(3))
    with pytest.raises(ValueError):
        PermutationSearch("blocks", 10)
    with pytest.raises(ValueError):
        PermutationSearch("everything")


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    p = GridProfile(make_grid(37), rng.normal(size=37) * 1e-7)
    write_profile_csv(p, tmp_path / "p.csv")
    q = read_profile_csv(tmp_path / "p.csv")
    assert np.array_equal(p.values, q.values)
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "x,value"


@given(st.integers(1, 400), finite, finite)
def test_affine_quadrature_exact(M, a, b):
    p = GridProfile.from_function(make_grid(M), lambda x: a * x + b)
    assert abs(integrate(p) - (a / 2 + b)) <= 1e-12 * (1 + abs(a) + abs(b))


@given(st.lists(finite, min_size=1, max_size=12), st.integers(1, 6))
def test_embed_average_left_inverse(v, r):
    assert np.array_equal(block_average(embed_step(v, r * len(v)), len(v)), np.asarray(v, dtype=float))


@settings(max_examples=60)
@given(st.lists(finite, min_size=2, max_size=5), st.integers(1, 4), st.randoms())
def test_perm_dist_bounded_and_zero_on_permutations(v, r, rnd):
    K = len(v)
    perm = list(range(K))
    rnd.shuffle(perm)
    p = embed_step(v, K * r)
    q = embed_step([v[i] for i in perm], K * r)
    for search in (IDENTITY, SORT_VALUES, exhaustive_blocks(K)):
        assert perm_invariant_dist(p, q, search) <= l2_dist(p, q) + 1e-15
    assert perm_invariant_dist(p, q, SORT_VALUES) <= 1e-12
    assert perm_invariant_dist(p, q, exhaustive_blocks(K)) <= 1e-12


@given(st.lists(st.lists(finite, min_size=6, max_size=6), min_size=3, max_size=3))
def test_triangle_inequality(rows):
    g = make_grid(6)
    p, q, r = (GridProfile(g, np.array(v)) for v in rows)
    assert l2_dist(p, r) <= l2_dist(p, q) + l2_dist(q, r) + 1e-12 * (1 + sum(map(l2_norm, (p, q, r))))


def test_exhaustive_block_search_matches_brute_force():
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=4), rng.normal(size=4)
    brute = min(np.sqrt(np.mean((a - b[list(s)]) ** 2)) for s in itertools.permutations(range(4)))
    d = perm_invariant_dist(embed_step(a, 8), embed_step(b, 8), exhaustive_blocks(4))
    assert d == pytest.approx(brute, abs=1e-14)
