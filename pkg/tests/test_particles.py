import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special
from scipy.optimize import minimize_scalar
from scipy.stats import gamma as gamma_dist

from grbm.domain import skew_symmetry_defect, validate
from grbm.errors import GridBoundaryError, NonIntegrableError, ParameterError
from grbm.particles import (ParticleConfig, biconjugate, convex_conjugate, equilibrium_speed, gap_data,
                            particles_from_driver, polymer_partition_smalln, simulate_particles, stationary_gap_law,
                            step_initial, step_speed)
from grbm.potential import beta_exponential, exponential, zero
from grbm.sde import SimConfig, ergodic_average, noise_blocks


def test_config_validation():
    with pytest.raises(ParameterError):
        ParticleConfig(1, [0.0], exponential())
    with pytest.raises(ParameterError):
        ParticleConfig(3, [0.0, 1.0], exponential())
    with pytest.raises(ParameterError):
        ParticleConfig(2, [0.0, 1.0], exponential(), drift_convention="other")


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_gap_data_is_skew_symmetric(n):
    pc = ParticleConfig(n, np.linspace(1.0, 0.0, n), exponential())
    data = gap_data(pc)
    assert skew_symmetry_defect(data).max_abs_defect < 1e-12
    assert validate(data).valid
    np.testing.assert_allclose(np.diag(data.A), 2.0)
    np.testing.assert_allclose(data.mu, -np.diff(pc.nu))


@pytest.mark.parametrize("alpha", [0.3, 1.0, 2.5, 7.0])
def test_equilibrium_speed_is_minus_digamma(alpha):
    # the gap is -log G with G ~ Gamma(alpha)
    assert equilibrium_speed(exponential(), alpha) == pytest.approx(-special.digamma(alpha), abs=1e-9)


def test_equilibrium_speed_requires_decay():
    with pytest.raises(NonIntegrableError):
        equilibrium_speed(exponential(), -0.5)
    with pytest.raises(NonIntegrableError):
        equilibrium_speed(zero(), 1.0)


def test_stationary_gap_law_matches_gamma():
    law = stationary_gap_law(exponential(), 1.5)
    # P(Y < 0) = P(G > 1)
    assert law.cdf(0.0) == pytest.approx(gamma_dist.sf(1.0, 1.5), abs=1e-6)
    assert law.mean() == pytest.approx(-special.digamma(1.5), abs=1e-5)


def test_negative_gap_probability_increases_with_drift_gap():
    probs = [stationary_gap_law(exponential(), a).cdf(0.0) for a in (0.5, 1.0, 2.0, 4.0)]
    assert np.all(np.diff(probs) > 0)


def test_conjugate_of_quadratic():
    x = np.linspace(-10, 10, 20001)
    p = np.linspace(-5, 5, 41)
    np.testing.assert_allclose(convex_conjugate(x, x**2 / 2, p), p**2 / 2, atol=1e-6)
    with pytest.raises(GridBoundaryError):
        convex_conjugate(x, x**2 / 2, 20.0)


def test_biconjugate_of_convex_function_is_itself():
    x = np.linspace(-3, 3, 601)
    f = np.cosh(x)
    np.testing.assert_allclose(biconjugate(x, f), f, atol=1e-12)


def test_biconjugate_is_convex_hull():
    x = np.linspace(-2, 2, 401)
    f = (x**2 - 1) ** 2
    hull = np.where(np.abs(x) <= 1, 0.0, f)
    np.testing.assert_allclose(biconjugate(x, f, np.linspace(-30, 30, 6001)), hull, atol=1e-3)
    assert np.all(biconjugate(x, f) <= f + 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.05, 3.0), st.floats(0.0, 1.0))
def test_step_speed_is_concave(a, b, lam):
    x = np.geomspace(0.02, 50, 300)
    psi = -special.digamma(x)
    g = lambda s: step_speed(x, psi, s)
    mid = lam * a + (1 - lam) * b
    assert g(mid) >= lam * g(a) + (1 - lam) * g(b) - 1e-9


def test_step_speed_matches_direct_infimum():
    x = np.geomspace(0.02, 50, 4000)
    psi = -special.digamma(x)
    for a in (0.5, 1.0, 2.0):
        direct = minimize_scalar(lambda s: a * s - special.digamma(s), bounds=(0.02, 50), method="bounded").fun
        assert step_speed(x, psi, a) == pytest.approx(direct, abs=1e-4)


def test_polymer_partition_linear_drivers():
    t = np.linspace(0, 2, 4001)
    a, c = 0.7, -0.4
    B = np.vstack([a * t, c * t])
    Z = polymer_partition_smalln(2, B, t)
    ref = np.exp(c * t) * np.expm1((a - c) * t) / (a - c)
    np.testing.assert_allclose(Z, ref, rtol=1e-6, atol=1e-12)


def test_polymer_partition_three_levels_against_nested_quadrature():
    t = np.linspace(0, 1.5, 3001)
    fs = [np.sin, lambda s: np.cos(2 * s) - 1, lambda s: 0.5 * s**2]
    B = np.vstack([f(t) for f in fs])
    Z = polymer_partition_smalln(3, B, t)

    def z2(s):
        return integrate.quad(lambda u: np.exp(fs[0](u) + fs[1](s) - fs[1](u)), 0, s, epsabs=1e-13)[0]

    T = t[-1]
    ref = integrate.quad(lambda s: z2(s) * np.exp(fs[2](T) - fs[2](s)), 0, T, epsabs=1e-12)[0]
    assert Z[-1] == pytest.approx(ref, rel=1e-6)
    with pytest.raises(ParameterError):
        polymer_partition_smalln(4, np.zeros((4, 3)), np.arange(3.0))


def test_engine_matches_direct_loop():
    pc = ParticleConfig(3, [0.5, 0.0, -0.2], beta_exponential(2.0))
    cfg = SimConfig(dt=1e-3, t_max=0.5, seed=8)
    ens = simulate_particles(pc, cfg)
    (_, block), = list(noise_blocks(8, 1, cfg.n_steps, 3))
    direct = particles_from_driver(pc, block[0] * np.sqrt(cfg.dt), cfg.dt, step_initial(3))
    np.testing.assert_allclose(ens.paths[0], direct, rtol=1e-12, atol=1e-12)


def test_literal_convention_agrees_only_for_exponential():
    cfg = SimConfig(dt=1e-3, t_max=0.5, seed=2)
    same = [simulate_particles(ParticleConfig(3, [1.0, 0.0, 0.0], exponential(), c), cfg).paths
            for c in ("generator", "literal")]
    np.testing.assert_array_equal(same[0], same[1])
    U = beta_exponential(2.0)
    diff = [simulate_particles(ParticleConfig(3, [1.0, 0.0, 0.0], U, c), cfg).paths for c in ("generator", "literal")]
    assert np.max(np.abs(diff[0] - diff[1])) > 1e-3


def test_two_particle_gap_relaxes_to_gamma_law():
    pc = ParticleConfig(2, [1.0, 0.0], exponential())
    ens = simulate_particles(pc, SimConfig(dt=2e-3, t_max=400.0, burn_in=20.0, seed=4, n_paths=8, x0=[0.0, 0.0]))
    avg = ergodic_average(ens, lambda s: s[..., 1] - s[..., 0], 20.0)
    assert abs(avg["estimate"] + special.digamma(1.0)) < 4 * avg["stderr"] + 0.01
