import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from grbm.density import loggamma_marginal, loggamma_normalizer
from grbm.errors import NonIntegrableError, ParameterError
from grbm.stats import EULER_GAMMA, batch_means, digamma, empirical_moments, fokker_planck_1d_oracle, ks_statistic


def test_digamma_known_values():
    assert abs(digamma(1.0) + 0.5772156649015329) < 1e-14
    assert abs(digamma(2.0) - (1.0 - EULER_GAMMA)) < 1e-14
    assert abs(digamma(0.5) - (-EULER_GAMMA - 2 * np.log(2))) < 1e-13


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 100.0))
def test_digamma_recurrence(x):
    assert abs(digamma(x + 1) - digamma(x) - 1.0 / x) < 1e-12 * max(1.0, 1.0 / x)


def test_digamma_matches_mpmath_on_grid():
    xs = np.concatenate([np.linspace(0.01, 1, 50), np.linspace(1, 100, 200)])
    ref = np.array([float(mpmath.digamma(mpmath.mpf(x))) for x in xs])
    err = np.abs(digamma(xs) - ref) / np.maximum(1.0, np.abs(ref))
    assert err.max() < 1e-12


def test_digamma_rejects_non_positive():
    with pytest.raises(ParameterError):
        digamma(0.0)
    with pytest.raises(ParameterError):
        digamma(np.array([1.0, -2.0]))


def test_ks_point_mass_against_normal():
    assert ks_statistic(np.zeros(100), norm.cdf).D == pytest.approx(0.5)


def test_ks_shifted_samples():
    x = np.random.default_rng(1).normal(size=2000) + 10.0
    assert ks_statistic(x, norm.cdf).D > 0.999


def test_ks_rejects_nan():
    with pytest.raises(ParameterError):
        ks_statistic([0.1, np.nan], norm.cdf)


def test_ks_calibration():
    passes = 0
    for seed in range(100):
        u = np.random.default_rng(seed).uniform(size=10_000)
        passes += ks_statistic(norm.ppf(u), norm.cdf).p_value > 0.01
    assert passes >= 99


def test_batch_means_constant_series():
    m, s = batch_means(np.full(1000, 3.0))
    assert m == 3.0 and s == 0.0


def test_empirical_moments_gamma():
    x = np.random.default_rng(2).gamma(2.0, size=100_000)
    mom = empirical_moments(x)
    mean, se = mom["mean"]
    assert abs(mean - 2.0) < 3 * se
    assert mom["variance"][0] == pytest.approx(2.0, rel=0.05)


def test_empirical_moments_symmetric_skewness():
    x = np.random.default_rng(3).normal(size=100_000)
    sk, se = empirical_moments(x)["skewness"]
    assert abs(sk) < 3 * se


def test_fokker_planck_ou_is_gaussian():
    # dX = -X dt + sigma dW has stationary variance sigma^2 / 2
    x = np.linspace(-12, 12, 24001)
    tab = fokker_planck_1d_oracle(lambda y: -y, 2.0, x)
    assert np.max(np.abs(tab.pdf - norm.pdf(x))) < 1e-10
    assert abs(tab.integral() - 1.0) < 1e-10
    half = fokker_planck_1d_oracle(lambda y: -y, 1.0, x)
    assert np.max(np.abs(half.pdf - norm.pdf(x, scale=np.sqrt(0.5)))) < 1e-10


def test_fokker_planck_loggamma_shape():
    mu = 1.5
    x = np.linspace(-6, 40, 200_001)
    tab = fokker_planck_1d_oracle(lambda y: np.exp(-y) - mu, 1.0, x)
    law = loggamma_marginal(mu)
    assert np.max(np.abs(tab.pdf - law.pdf(x))) < 1e-7


def test_fokker_planck_constant_drift_on_half_line():
    x = np.linspace(0, 40, 40001)
    tab = fokker_planck_1d_oracle(lambda y: np.full_like(y, -0.5), 1.0, x, closed_left=True)
    np.testing.assert_allclose(tab.pdf, np.exp(-x), rtol=1e-6, atol=1e-12)


def test_fokker_planck_detects_non_decay():
    with pytest.raises(NonIntegrableError):
        fokker_planck_1d_oracle(lambda y: np.full_like(y, 0.1), 1.0, np.linspace(-10, 10, 1001))


def test_loggamma_normalizer_half():
    assert loggamma_normalizer(0.5) == pytest.approx(0.5, rel=1e-14)
