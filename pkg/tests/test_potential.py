import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grbm.domain import orthant
from grbm.errors import ParameterError, RegularityError
from grbm.potential import (beta_exponential, custom, exponential, from_dict, is_concave, linear, regularity_report,
                            softplus, theta_slope, zero)

FAMILIES = [exponential(), beta_exponential(3.0), softplus(2.0), zero(), linear(0.5)]


@pytest.mark.parametrize("U", FAMILIES, ids=lambda U: U.name)
def test_derivatives_match_finite_differences(U):
    x = np.linspace(-3, 3, 13)
    h = 1e-5
    np.testing.assert_allclose(U.du(x), (U.u(x + h) - U.u(x - h)) / (2 * h), rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(U.d2u(x), (U.du(x + h) - U.du(x - h)) / (2 * h), rtol=1e-6, atol=1e-8)


@pytest.mark.parametrize("U", FAMILIES, ids=lambda U: U.name)
def test_dict_round_trip(U):
    again = from_dict(U.to_dict())
    x = np.linspace(-2, 2, 5)
    np.testing.assert_array_equal(again.u(x), U.u(x))


def test_unknown_potential():
    with pytest.raises(ParameterError):
        from_dict({"name": "cubic"})


def test_beta_rejects_non_positive():
    with pytest.raises(ParameterError):
        beta_exponential(0.0)


def test_exponential_is_concave_and_theta_is_slope():
    U = exponential()
    assert is_concave(U)
    assert theta_slope(U, 0.0) == pytest.approx(1.0)
    assert theta_slope(U, -1.0) == pytest.approx(np.e)


def test_non_concave_theta_uses_chords():
    U = custom("wiggle", lambda x: -np.exp(-x) + 0.1 * np.sin(x), lambda x: np.exp(-x) + 0.1 * np.cos(x),
               lambda x: -np.exp(-x) - 0.1 * np.sin(x))
    theta = theta_slope(U, 0.0, grid=(-30.0, 30.0, 0.01))
    x = np.linspace(-30, 30, 6001)
    assert np.all(U.u(x) - U.u(0.0) <= theta * x + 1e-9)


def test_linear_growth_has_no_slope_bound():
    with pytest.raises(RegularityError):
        theta_slope(linear(-1.0), 0.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.2, 20.0), st.floats(-2.0, 2.0))
def test_theta_bounds_concave_potential(beta, a):
    U = beta_exponential(beta)
    theta = theta_slope(U, a)
    x = np.linspace(-5, 5, 1001)
    assert np.all(U.u(x + a) - U.u(a) <= theta * x + 1e-9 * (1 + np.abs(U.u(x + a))))


def test_regularity_report_exponential_passes(hr_orthant):
    rep = regularity_report(exponential(), hr_orthant)
    assert rep.passed
    assert rep.kappa is not None


def test_regularity_report_zero_potential_fails():
    data = orthant(np.zeros((1, 1)), [1.0])
    assert not regularity_report(zero(), data).passed
