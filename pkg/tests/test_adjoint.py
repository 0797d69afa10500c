import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grbm.adjoint import (Bump, GeneratorSpec, adjoint_residual_analytic, adjoint_residual_fd, apply_generator,
                          density_points, drift_field, reduced_residual, weak_stationarity)
from grbm.domain import ReflectionData, orthant
from grbm.errors import InvalidDataError, StencilUnderflowError
from grbm.pitman import longest_element_word, word_data, word_theta
from grbm.potential import beta_exponential, exponential, softplus, zero


def test_drift_without_potential_is_minus_mu(wedge):
    spec = GeneratorSpec(wedge, zero())
    np.testing.assert_allclose(drift_field(spec, np.array([0.3, 0.9])), -wedge.mu)


def test_invalid_data_rejected():
    bad = ReflectionData(N=[[1.0, 0.0], [0.0, 2.0]], Q=np.zeros((2, 2)), b=[0, 0], mu=[1, 1])
    with pytest.raises(InvalidDataError):
        GeneratorSpec(bad, exponential())


@pytest.mark.parametrize("U", [exponential(), beta_exponential(2.5), softplus(1.0)], ids=lambda U: U.name)
def test_skew_symmetric_residuals_vanish(wedge, U):
    spec = GeneratorSpec(wedge, U)
    x = np.random.default_rng(0).normal(size=(40, 2))
    scale = (1.0 + np.abs(U.du(spec.face_arguments(x))).sum(axis=1)) ** 2
    assert np.max(np.abs(adjoint_residual_analytic(spec, x)) / scale) < 1e-13
    if U.name != "softplus":
        x = density_points(spec, 40, seed=0)
    assert np.max(np.abs(adjoint_residual_fd(spec, x, 1e-3, richardson=True))) < 1e-4


def test_orthant_residuals_vanish(hr_orthant):
    spec = GeneratorSpec(hr_orthant, exponential())
    x = density_points(spec, 50, seed=1)
    assert np.max(np.abs(adjoint_residual_analytic(spec, x))) < 1e-12
    assert np.max(np.abs(adjoint_residual_fd(spec, x))) < 1e-4


def test_routes_agree_without_skew_symmetry(wedge):
    Q = wedge.Q.copy()
    Q[0] *= 1.5
    spec = GeneratorSpec(wedge.replace(Q=Q), exponential())
    x = np.random.default_rng(2).normal(size=(30, 2))
    a = adjoint_residual_analytic(spec, x)
    f = adjoint_residual_fd(spec, x, 1e-3, richardson=True)
    assert np.max(np.abs(a)) > 1e-2
    np.testing.assert_allclose(f, a, atol=1e-6)


def test_richardson_improves_accuracy(wedge):
    Q = wedge.Q.copy()
    Q[1] *= 0.7
    spec = GeneratorSpec(wedge.replace(Q=Q), exponential())
    x = np.array([[0.2, 0.4], [1.0, -0.3]])
    a = adjoint_residual_analytic(spec, x)
    plain = np.abs(adjoint_residual_fd(spec, x, 1e-2) - a).max()
    rich = np.abs(adjoint_residual_fd(spec, x, 1e-2, richardson=True) - a).max()
    assert rich < plain / 10


def test_reduced_residual_matches_full(wedge):
    Q = wedge.Q.copy()
    Q[0] *= 1.5
    spec_ok = GeneratorSpec(wedge, exponential())
    x = np.random.default_rng(3).normal(size=(10, 2))
    assert np.max(np.abs(reduced_residual(spec_ok, x))) < 1e-12
    with pytest.raises(InvalidDataError):
        reduced_residual(GeneratorSpec(orthant([[0.0, -0.4], [-0.2, 0.0]], [1, 1],
                                               [[1.0, -0.3], [-0.3, 1.0]]), exponential()), x)


def test_literal_scaled_word_density_fails_stationarity():
    """``exp{2 sum U(x/sqrt 2) - 2 theta . x}`` is not stationary for the word process."""
    w = longest_element_word(3)
    mu = [-1.0, 0.0, 1.0]
    spec = GeneratorSpec(word_data(w, mu), exponential())
    theta = word_theta(w, mu)
    U = exponential()

    def literal(x):
        x = np.atleast_2d(x)
        return 2 * U.u(x / np.sqrt(2)).sum(axis=1) - 2 * x @ theta

    x = density_points(spec, 20, seed=4)
    assert np.max(np.abs(adjoint_residual_fd(spec, x, logp=literal))) > 0.5
    assert np.max(np.abs(adjoint_residual_fd(spec, x))) < 1e-3


def test_stencil_underflow_is_reported(wedge):
    spec = GeneratorSpec(wedge, exponential())
    with pytest.raises(StencilUnderflowError):
        adjoint_residual_fd(spec, np.array([-10.0, -10.0]))


def test_bump_derivatives():
    f = Bump(np.array([0.3, -0.2]), 0.8)
    x = np.array([0.5, 0.1])
    h = 1e-5
    E = np.eye(2) * h
    g = np.array([(f.value(x + E[i]) - f.value(x - E[i])) / (2 * h) for i in range(2)])
    np.testing.assert_allclose(f.grad(x), g, rtol=1e-6)
    H = np.array([(f.grad(x + E[i]) - f.grad(x - E[i])) / (2 * h) for i in range(2)])
    np.testing.assert_allclose(f.hess(x), H, rtol=1e-5, atol=1e-9)
    assert f.value(np.array([2.0, 2.0])) == 0.0


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9))
def test_bump_hessian_symmetric(a, b):
    f = Bump(np.zeros(2), 1.0)
    H = f.hess(np.array([a, b]) * 0.7)
    np.testing.assert_allclose(H, H.T, atol=1e-14)


def test_apply_generator_on_linear_function(wedge):
    spec = GeneratorSpec(wedge, exponential())

    class Linear:
        def grad(self, x):
            return np.array([1.0, 2.0])

        def hess(self, x):
            return np.zeros((2, 2))

    x = np.array([0.4, 0.2])
    assert apply_generator(spec, Linear(), x) == pytest.approx(float(spec.drift(x) @ [1.0, 2.0]))


def test_weak_stationarity_with_bump(wedge):
    spec = GeneratorSpec(wedge, exponential())
    val, err = weak_stationarity(spec, Bump(np.array([0.5, 1.0]), 0.6))
    assert err < 1e-10
    assert abs(val) < 1e-9


def test_weak_stationarity_detects_wrong_density(wedge):
    Q = wedge.Q.copy()
    Q[0] *= 1.5
    spec = GeneratorSpec(wedge.replace(Q=Q), exponential())
    val, err = weak_stationarity(spec, Bump(np.array([0.5, 1.0]), 0.6))
    assert abs(val) > 0.03 > 100 * err
