from __future__ import annotations

import numpy as np
import pytest
from scipy import stats

from kbrl_lmp.noise import (
    CAUCHY_LIKE,
    GAUSS_LIKE,
    NoiseSpec,
    alpha_stable_rvs,
    alpha_stable_sample,
    gaussian,
    gaussian_noise_std,
    preset,
    sample_noise,
)

N = 100_000


def stable(alpha, beta=0.0, loc=0.0, scale=1.0):
    return NoiseSpec(kind="alpha_stable", stability=alpha, skewness=beta, location=loc, scale=scale)


def test_presets():
    assert (GAUSS_LIKE.stability, GAUSS_LIKE.skewness, GAUSS_LIKE.location, GAUSS_LIKE.scale) == (1.95, 0.5, 0.5, 1e-2)
    assert (CAUCHY_LIKE.stability, CAUCHY_LIKE.skewness, CAUCHY_LIKE.location, CAUCHY_LIKE.scale) == (1.0, 0.5, 0.5, 1.0)
    assert preset("cauchy_like") == CAUCHY_LIKE
    assert NoiseSpec.from_dict("gauss_like") == GAUSS_LIKE
    assert NoiseSpec.from_dict(CAUCHY_LIKE.to_dict()) == CAUCHY_LIKE


@pytest.mark.parametrize("kwargs", [dict(stability=0.0), dict(stability=2.5), dict(skewness=1.5), dict(scale=0.0)])
def test_invalid_specs_rejected(kwargs):
    with pytest.raises(ValueError):
        NoiseSpec(kind="alpha_stable", **kwargs)


def test_gaussian_std_calibration():
    assert gaussian_noise_std(np.array([1.0, 0.0]), 0.0) == pytest.approx(1.0)
    assert gaussian_noise_std(np.array([0.6, 0.8]), 20.0) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        gaussian_noise_std(np.zeros(3), 20.0)


def test_empirical_snr():
    rng = np.random.default_rng(0)
    theta = rng.standard_normal(10)
    theta /= np.linalg.norm(theta)
    X = rng.standard_normal((N, 10))
    o = sample_noise(gaussian(20.0), theta, rng, N)
    snr = 10 * np.log10(np.mean((X @ theta) ** 2) / np.mean(o**2))
    assert abs(snr - 20) <= 0.5


def test_noiseless_segment_is_zero():
    assert np.all(sample_noise(NoiseSpec(snr_db=float("inf")), np.ones(2), np.random.default_rng(0), 5) == 0)


def test_stability_two_is_gaussian_with_variance_two_scale_squared():
    draws = alpha_stable_rvs(stable(2.0, scale=0.3), np.random.default_rng(1), N)
    assert abs(np.var(draws) / (2 * 0.3**2) - 1) <= 0.05
    z = (draws - draws.mean()) / draws.std()
    assert 2.9 <= np.mean(z**4) <= 3.1


def test_standard_cauchy_median():
    draws = alpha_stable_rvs(stable(1.0), np.random.default_rng(2), N)
    assert abs(np.median(draws)) <= 0.05
    # quartiles of the standard Cauchy are -1 and 1
    q1, q3 = np.quantile(draws, [0.25, 0.75])
    assert abs(q1 + 1) < 0.05 and abs(q3 - 1) < 0.05


@pytest.mark.parametrize("alpha,beta", [(1.95, 0.5), (1.5, -0.3), (1.0, 0.5), (0.8, 0.9)])
def test_distribution_matches_scipy_s1(alpha, beta):
    draws = alpha_stable_rvs(stable(alpha, beta, loc=0.5, scale=1.0), np.random.default_rng(3), 20_000)
    ref = stats.levy_stable(alpha, beta, loc=0.5, scale=1.0)
    ref.dist.parameterization = "S1"
    qs = np.array([0.1, 0.25, 0.5, 0.75, 0.9])
    # empirical quantiles mapped through the reference CDF should land on the nominal levels
    np.testing.assert_allclose(ref.cdf(np.quantile(draws, qs)), qs, atol=0.01)


def test_location_shift_is_exact_for_alpha_not_one():
    a = alpha_stable_rvs(stable(1.5, 0.5, loc=0.0), np.random.default_rng(4), 1000)
    b = alpha_stable_rvs(stable(1.5, 0.5, loc=2.5), np.random.default_rng(4), 1000)
    np.testing.assert_allclose(b - a, 2.5, atol=1e-12)


def test_location_shift_for_alpha_one():
    a = alpha_stable_rvs(stable(1.0, 0.5, loc=0.0), np.random.default_rng(4), 1000)
    b = alpha_stable_rvs(stable(1.0, 0.5, loc=-1.0), np.random.default_rng(4), 1000)
    np.testing.assert_allclose(b - a, -1.0, atol=1e-12)


def test_deterministic_under_seed():
    a = alpha_stable_rvs(CAUCHY_LIKE, np.random.default_rng(5), 100)
    b = alpha_stable_rvs(CAUCHY_LIKE, np.random.default_rng(5), 100)
    np.testing.assert_array_equal(a, b)
    assert isinstance(alpha_stable_sample(CAUCHY_LIKE, np.random.default_rng(5)), float)


def test_cauchy_like_tail_dominates_gauss_like():
    rng = np.random.default_rng(6)
    tail_c = np.mean(np.abs(alpha_stable_rvs(CAUCHY_LIKE, rng, N)) > 10)
    tail_g = np.mean(np.abs(alpha_stable_rvs(GAUSS_LIKE, rng, N)) > 10)
    assert tail_c > 0 and tail_c >= 10 * tail_g
