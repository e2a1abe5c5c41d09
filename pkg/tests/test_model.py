from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kbrl_lmp.model import (
    Scenario,
    State,
    flatten,
    generate_sample,
    generate_stream,
    normalize_state,
    normalized_deviation,
    unflatten,
)
from kbrl_lmp.noise import CAUCHY_LIKE, NoiseSpec, gaussian

NOISELESS = NoiseSpec(snr_db=float("inf"))
finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_flatten_order():
    s = State([1, 2], 3, [4, 5])
    np.testing.assert_array_equal(flatten(s), [1, 2, 3, 4, 5])
    assert s.flatten().shape == (2 * s.L + 1,)


def test_zero_state_flattens_to_zero():
    np.testing.assert_array_equal(flatten(State.zeros(4)), np.zeros(9))


@given(arrays(float, 7, elements=finite))
def test_flatten_round_trip(v):
    np.testing.assert_array_equal(flatten(unflatten(v)), v)


def test_state_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        State([1, 2], 0, [1])
    with pytest.raises(ValueError):
        unflatten(np.zeros(4))


def test_normalize_known_vector():
    s = unflatten(np.array([3.0, 4, 0, 0, 0]))
    np.testing.assert_allclose(flatten(normalize_state(s)), [0.6, 0.8, 0, 0, 0])


def test_normalize_zero_state_untouched():
    np.testing.assert_array_equal(flatten(normalize_state(State.zeros(3))), np.zeros(7))


@given(arrays(float, 5, elements=finite).filter(lambda v: np.linalg.norm(v) > 1e-6))
def test_normalized_state_has_unit_norm(v):
    assert abs(np.linalg.norm(flatten(normalize_state(unflatten(v)))) - 1) < 1e-12


def test_zero_system_zero_noise_gives_zero_output():
    sc = Scenario(L=3, horizon=50, noise_segments=((0, NOISELESS),), theta_star=np.zeros(3))
    rng = np.random.default_rng(0)
    assert all(generate_sample(sc, n, rng)[1] == 0.0 for n in range(50))
    assert np.all(generate_stream(sc, rng).y == 0.0)


def test_identity_projection_system():
    sc = Scenario(L=4, horizon=20, noise_segments=((0, NOISELESS),), theta_star=np.eye(4)[0])
    stream = generate_stream(sc, np.random.default_rng(1))
    np.testing.assert_array_equal(stream.y, stream.X[:, 0])


def test_noiseless_residual_is_exactly_zero():
    theta = np.random.default_rng(2).standard_normal(5)
    sc = Scenario(L=5, horizon=200, noise_segments=((0, NOISELESS),), theta_star=theta)
    stream = generate_stream(sc, np.random.default_rng(3))
    assert np.all(stream.y - stream.X @ theta == 0.0)
    x, y = generate_sample(sc, 0, np.random.default_rng(4))
    assert y - x @ theta == 0.0


def test_generate_sample_deterministic():
    sc = Scenario(L=3, horizon=10, noise_segments=((0, gaussian(20.0)),), theta_star=np.ones(3))
    a = generate_sample(sc, 5, np.random.default_rng(9))
    b = generate_sample(sc, 5, np.random.default_rng(9))
    np.testing.assert_array_equal(a[0], b[0])
    assert a[1] == b[1]


def test_generate_sample_out_of_range():
    sc = Scenario(L=1, horizon=3, noise_segments=((0, NOISELESS),), theta_star=np.ones(1))
    with pytest.raises(IndexError):
        generate_sample(sc, 3, np.random.default_rng(0))


def test_empirical_snr_of_gaussian_segment():
    rng = np.random.default_rng(11)
    theta = rng.standard_normal(10)
    theta /= np.linalg.norm(theta)
    sc = Scenario(L=10, horizon=100_000, noise_segments=((0, gaussian(20.0)),), theta_star=theta)
    stream = generate_stream(sc, rng)
    clean = stream.X @ theta
    snr = 10 * np.log10(np.mean(clean**2) / np.mean(stream.noise**2))
    assert abs(snr - 20) <= 0.5


def test_segments_must_cover_from_zero_and_increase():
    with pytest.raises(ValueError):
        Scenario(L=2, horizon=10, noise_segments=((1, NOISELESS),))
    with pytest.raises(ValueError):
        Scenario(L=2, horizon=10, noise_segments=((0, NOISELESS), (5, NOISELESS), (5, NOISELESS)))
    with pytest.raises(ValueError):
        Scenario(L=2, horizon=10, noise_segments=((0, NOISELESS), (10, NOISELESS)))
    with pytest.raises(ValueError):
        Scenario(L=2, horizon=10, noise_segments=((0, NOISELESS),), system_change=(10, None))


def test_segment_bounds_partition_horizon():
    sc = Scenario(L=2, horizon=10, noise_segments=((0, NOISELESS), (4, CAUCHY_LIKE)))
    assert sc.segment_bounds() == [(0, 4), (4, 10)]
    assert [sc.segment_index(n) for n in (0, 3, 4, 9)] == [0, 0, 1, 1]


def test_system_change_switches_theta():
    a, b = np.ones(2), -np.ones(2)
    sc = Scenario(L=2, horizon=10, noise_segments=((0, NOISELESS),), theta_star=a, system_change=(6, b))
    stream = generate_stream(sc, np.random.default_rng(0))
    np.testing.assert_array_equal(stream.y[:6], stream.X[:6] @ a)
    np.testing.assert_array_equal(stream.y[6:], stream.X[6:] @ b)
    np.testing.assert_array_equal(sc.theta_at(5), a)
    np.testing.assert_array_equal(sc.theta_at(6), b)


def test_realize_draws_missing_systems():
    sc = Scenario(L=3, horizon=10, noise_segments=((0, NOISELESS),), system_change=(5, None))
    assert not sc.is_realized
    r = sc.realize(np.random.default_rng(0))
    assert r.is_realized and r.theta_star.shape == (3,)
    assert not np.array_equal(r.theta_at(0), r.theta_at(5))


def test_scenario_json_round_trip(tmp_path):
    sc = Scenario(
        L=2,
        horizon=10,
        noise_segments=((0, gaussian(20.0)), (5, CAUCHY_LIKE)),
        theta_star=np.array([1.0, 2.0]),
        system_change=(5, None),
        seed=7,
    )
    path = tmp_path / "sc.json"
    path.write_text(json.dumps(sc.to_dict()))
    back = Scenario.load(path)
    assert back.to_dict() == sc.to_dict()


def test_normalized_deviation():
    assert normalized_deviation(np.array([3.0, 4.0]), np.zeros(2)) == 1.0
    assert normalized_deviation(np.array([3.0, 4.0]), np.array([3.0, 4.0])) == 0.0


@settings(max_examples=30)
@given(st.integers(1, 6), st.integers(0, 2**31))
def test_stream_shapes(L, seed):
    sc = Scenario(L=L, horizon=7, noise_segments=((0, gaussian(10.0)), (3, CAUCHY_LIKE)))
    sc = sc.realize(np.random.default_rng(seed))
    stream = generate_stream(sc, np.random.default_rng(seed))
    assert stream.X.shape == (7, L) and stream.y.shape == (7,) and len(stream) == 7
