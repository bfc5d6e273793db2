import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from graphon_games.errors import ConfigError
from graphon_games.function_space import make_grid
from graphon_games.game import (POINT_MASS, AffineDrift, ConstantBundle, CustomCost, CustomDrift, GameSpec,
                                IdentityDrift, NoiseSpec, QuadraticCost, QuadraticRunningCost, builtin_beach,
                                builtin_cities, builtin_cournot, certify, convexity_gap, cross_lipschitz_gap,
                                drift_lipschitz_gap, gaussian, monotonicity_probe, quadratic_game, spec_from_config,
                                spec_to_config, uniform)
from graphon_games.graphon import Constant, discretize

real = st.floats(-50, 50, allow_nan=False)
GAMES = [builtin_beach(), builtin_cities(1.3, 0.4), builtin_cournot(1.0, 1.0, 0.2), builtin_cournot(2.0, 0.3, 0.7)]


def test_noise_laws():
    assert gaussian(2.0).variance == 4.0
    assert uniform(3.0).variance == pytest.approx(3.0)
    assert POINT_MASS.variance == 0.0
    assert np.all(POINT_MASS.sample(np.random.default_rng(0), (3, 2)) == 0)
    with pytest.raises(ConfigError):
        NoiseSpec("cauchy", 1.0)


def test_beach_examples():
    spec = builtin_beach()
    z = np.linspace(-2, 2, 9)
    a = (1 + z) / 3
    assert np.allclose(spec.cost.minimizer(z), a)
    for d in (-0.1, 0.1):
        assert np.all(spec.J(a + d, z) > spec.J(a, z))
    assert certify(spec, 1.0).uniqueness_value == pytest.approx(1 / 3)
    cert = certify(spec, 3.0)
    assert cert.uniqueness_value == pytest.approx(1.0) and not cert.uniqueness_ok
    assert certify(spec, 1e6).contraction_ok


def test_beach_reduction_matches_running_cost():
    # J(a, z) = E f(a + xi, a, z) with f = a^2 + 2x^2 - 2x + 1 + z^2 - 2xz
    spec = builtin_beach(gaussian(0.7))
    a, z = 0.3, -0.4
    expected = a * a + 2 * (a * a + 0.49) - 2 * a + 1 + z * z - 2 * a * z
    assert spec.J(a, z) == pytest.approx(expected)


def test_cities_examples():
    spec = builtin_cities(2.0, 0.3)
    z = np.array([0.0, 1.0, -3.0])
    assert np.allclose(spec.cost.minimizer(z), 2.0 + 0.3 * z)
    assert certify(builtin_cities(1.0, 0.5), 1.0).uniqueness_value == pytest.approx(0.5)
    with pytest.raises(ConfigError):
        builtin_cities(0.0, 0.2)


def test_cournot_examples():
    a, b, c = 1.5, 0.8, 0.3
    spec = builtin_cournot(a, b, c)
    z = np.array([0.0, 2.0])
    assert np.allclose(spec.cost.minimizer(z), (a + c * z) / (1 + 2 * b))
    bd = spec.bundle
    assert (bd.c_alpha, bd.c_z, bd.ell_c, bd.ell_J) == pytest.approx((b * b, c * c, 2 * b + 1, c))
    w = 1.7
    assert certify(spec, w).uniqueness_value == pytest.approx(c / (2 * b + 1) * b * w / (1 - c * w))
    assert not certify(spec, 1 / c).contraction_ok


def test_certify_rejects_negative_norm():
    with pytest.raises(ValueError):
        certify(builtin_beach(), -1.0)


def test_monotonicity_examples():
    op = discretize(Constant(1.0), make_grid(64))
    # f = (3/2) a^2 - (x - z)^2 with x = a + xi
    mono = quadratic_game(QuadraticRunningCost(aa=1.5, xx=-1.0, xz=2.0, zz=-1.0))
    rep = monotonicity_probe(mono, op, n_pairs=100, seed=1)
    assert rep.violations == 0 and rep.samples == 100 and rep.min_integral >= -1e-12
    flat = quadratic_game(QuadraticRunningCost(aa=1.0, x=1.0))
    rep = monotonicity_probe(flat, op, n_pairs=7, seed=2)
    assert rep.violations == 0 and rep.samples == 7


def test_quadratic_cost_requires_convexity():
    with pytest.raises(ConfigError):
        QuadraticCost(q2=0.0, q1=1.0, qz=0.0)
    with pytest.raises(ConfigError):
        ConstantBundle(1.0, 0.0, 0.0, 1.0, 1.0)


def test_custom_pieces():
    d = CustomDrift(lambda a, z: np.tanh(a) + 0.1 * z, 1.0, 0.1)
    assert d.affine() is None and d(0.0, 1.0) == pytest.approx(0.1)
    cost = CustomCost(lambda a, z: a**4 + a * a - a * z, lambda a, z: 4 * a**3 + 2 * a - z, 2.0, 1.0)
    spec = GameSpec(d, cost, NoiseSpec(), ConstantBundle(1.0, 0.01, 2.0, 1.0, 1.0))
    assert spec.dJ(1.0, 0.0) == 6.0 and not spec.is_quadratic


@pytest.mark.parametrize("spec", GAMES, ids=lambda s: f"{s.name}{s.params}")
def test_config_round_trip(spec):
    assert spec_from_config(spec_to_config(spec)) == spec


def test_config_round_trip_quadratic():
    spec = quadratic_game(QuadraticRunningCost(aa=1.0, xx=0.5, xz=-0.3, x=0.1), AffineDrift(0.2, 0.5, 0.1))
    back = spec_from_config(spec_to_config(spec))
    assert back.cost == spec.cost and back.bundle == spec.bundle and back.drift == spec.drift
    with pytest.raises(ConfigError):
        spec_from_config({"game": "chess"})
    with pytest.raises(ConfigError):
        spec_from_config({"game": "cities", "kappa": "1"})


@given(st.sampled_from(GAMES), real)
def test_minimizer_is_stationary(spec, z):
    a = spec.cost.minimizer(z)
    assert abs(spec.dJ(a, z)) <= 1e-12 * (1 + abs(z) + abs(a))


@given(st.sampled_from(GAMES), real, real, real)
def test_strong_convexity(spec, a, a2, z):
    assert convexity_gap(spec, a, a2, z) <= 1e-9 * (1 + a * a + a2 * a2)


@given(st.sampled_from(GAMES), real, real, real)
def test_cross_lipschitz(spec, a, z, z2):
    assert cross_lipschitz_gap(spec, a, z, z2) <= 1e-9 * (1 + abs(a) + abs(z) + abs(z2))


@given(st.sampled_from(GAMES), real, real, real, real)
def test_drift_sum_form(spec, a, z, a2, z2):
    assert drift_lipschitz_gap(spec, a, z, a2, z2, "sum") <= 1e-9 * (1 + abs(a) + abs(z) + abs(a2) + abs(z2))


@given(st.sampled_from(GAMES[:2]), real, real, real, real)
def test_drift_squared_form_identity(spec, a, z, a2, z2):
    assert drift_lipschitz_gap(spec, a, z, a2, z2, "squared") <= 1e-9 * (1 + a * a + a2 * a2)


@given(real, real, real, real)
def test_affine_drift_squared_form_with_doubled_constants(a, z, a2, z2):
    # the cross term rules out c_alpha = b^2, c_z = c^2; doubling both restores the squared form
    d = AffineDrift(1.0, 0.7, 0.4)
    db = d(a, z) - d(a2, z2)
    assert db**2 <= 2 * 0.49 * (a - a2) ** 2 + 2 * 0.16 * (z - z2) ** 2 + 1e-9 * (1 + db * db)


def test_identity_drift_is_z_free():
    assert IdentityDrift()(np.array([1.0, 2.0]), np.array([5.0, -5.0])).tolist() == [1.0, 2.0]
    assert math.isclose(AffineDrift(1.0, 2.0, 3.0)(1.0, 1.0), 2.0)
