import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grbm.adjoint import GeneratorSpec
from grbm.domain import ReflectionData, orthant
from grbm.errors import BlowUpError, IterationDivergenceError, ParameterError
from grbm.potential import custom, exponential
from grbm.sde import (PathEnsemble, SimConfig, beta_limit_compare, complementarity_residual, ergodic_average,
                      free_paths, simulate_grbm, skorokhod_reflect, sqrt_psd)


def one_dim(mu=1.0):
    return ReflectionData(N=[[1.0]], Q=[[0.0]], b=[0.0], mu=[mu])


def test_sim_config_validation():
    with pytest.raises(ParameterError):
        SimConfig(dt=0.0, t_max=1.0)
    with pytest.raises(ParameterError):
        SimConfig(dt=0.1, t_max=1.0, burn_in=1.0)
    with pytest.raises(ParameterError):
        SimConfig(dt=0.1, t_max=1.0, seed=-1)
    cfg = SimConfig(dt=0.01, t_max=1.0, seed=3, x0=[0.5], n_paths=2, thin=5)
    assert SimConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.n_steps == 100


def test_same_seed_same_paths(wedge):
    spec = GeneratorSpec(wedge, exponential())
    cfg = SimConfig(dt=1e-3, t_max=2.0, seed=11, n_paths=3)
    a, b = simulate_grbm(spec, cfg), simulate_grbm(spec, cfg)
    np.testing.assert_array_equal(a.paths, b.paths)


def test_path_independent_of_ensemble_size(wedge):
    spec = GeneratorSpec(wedge, exponential())
    small = simulate_grbm(spec, SimConfig(dt=1e-3, t_max=2.0, seed=5, n_paths=2))
    large = simulate_grbm(spec, SimConfig(dt=1e-3, t_max=2.0, seed=5, n_paths=7))
    np.testing.assert_array_equal(small.paths, large.paths[:2])


def test_compiled_and_numpy_routes_agree(wedge):
    U = exponential()
    mirror = custom("exp-copy", U.u, U.du, U.d2u)
    cfg = SimConfig(dt=1e-3, t_max=1.0, seed=2, n_paths=2, thin=10)
    a = simulate_grbm(GeneratorSpec(wedge, U), cfg)
    b = simulate_grbm(GeneratorSpec(wedge, mirror), cfg)
    np.testing.assert_allclose(a.paths, b.paths, rtol=1e-12, atol=1e-12)


def test_thinning_keeps_every_kth_state(wedge):
    spec = GeneratorSpec(wedge, exponential())
    full = simulate_grbm(spec, SimConfig(dt=1e-3, t_max=1.0, seed=1))
    thin = simulate_grbm(spec, SimConfig(dt=1e-3, t_max=1.0, seed=1, thin=10))
    np.testing.assert_array_equal(thin.paths[0], full.paths[0, ::10])
    np.testing.assert_allclose(thin.grid, full.grid[::10])


def test_blow_up_guard():
    cubic = custom("cubic", lambda y: y**4 / 4, lambda y: y**3, lambda y: 3 * y**2)
    with pytest.raises(BlowUpError):
        simulate_grbm(GeneratorSpec(one_dim(1.0), cubic), SimConfig(dt=0.1, t_max=10.0, x0=[2.0]))


def test_csv_and_binary_round_trip(wedge):
    ens = simulate_grbm(GeneratorSpec(wedge, exponential()), SimConfig(dt=0.01, t_max=0.1, seed=4, n_paths=2))
    buf = io.StringIO()
    ens.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "path_id,t,x_1,x_2"
    assert len(lines) == 1 + 2 * ens.grid.size
    back = np.loadtxt(io.StringIO(buf.getvalue()), delimiter=",", skiprows=1)
    np.testing.assert_array_equal(back[: ens.grid.size, 2:], ens.paths[0])
    blob = ens.to_binary()
    assert blob[:5] == b"GRBM1"
    again = PathEnsemble.from_binary(blob)
    np.testing.assert_array_equal(again.paths, ens.paths)
    np.testing.assert_array_equal(again.grid, ens.grid)


def test_sqrt_psd_of_singular_matrix():
    A = np.array([[2.0, -1.0], [-1.0, 0.5]])
    S = sqrt_psd(A)
    np.testing.assert_allclose(S @ S, A, atol=1e-12)


def test_skorokhod_one_dimensional_identity():
    rng = np.random.default_rng(0)
    B = np.concatenate([[0.0], np.cumsum(rng.normal(size=5000) * 0.03)]) + 0.2
    Z = skorokhod_reflect(B[None, :, None], [[0.0]]).paths[0, :, 0]
    ref = B - np.minimum(0.0, np.minimum.accumulate(B))
    assert np.array_equal(Z, ref)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-0.8, 0.8), st.floats(-0.8, 0.8))
def test_skorokhod_orthant_properties(seed, q12, q21):
    Q = np.array([[0.0, q12], [q21, 0.0]])
    W = np.cumsum(np.random.default_rng(seed).normal(size=(1, 400, 2)) * 0.1, axis=1)
    ens = skorokhod_reflect(W, Q)
    assert np.all(ens.paths >= -1e-12)
    assert np.all(np.diff(ens.regulator, axis=1) >= -1e-15)
    np.testing.assert_allclose(ens.paths, W + ens.regulator @ (np.eye(2) + Q), atol=1e-10)
    assert np.all(complementarity_residual(ens) < 1e-9)


def test_skorokhod_rejects_non_contractive():
    with pytest.raises(IterationDivergenceError):
        skorokhod_reflect(np.zeros((1, 10, 2)), [[0.0, 1.2], [1.1, 0.0]])


def test_free_paths_share_noise_with_soft_paths(hr_orthant):
    cfg = SimConfig(dt=1e-3, t_max=1.0, seed=9)
    free = free_paths(hr_orthant, cfg)
    soft = simulate_grbm(GeneratorSpec(hr_orthant, exponential()), cfg)
    # far from the walls the two differ only through the bounded push
    assert np.max(np.abs(free.paths - soft.paths)) < 5.0
    assert free.scheme == "free"


def test_ergodic_average_stderr_scales_with_paths():
    spec = GeneratorSpec(one_dim(1.0), exponential())
    base = dict(dt=1e-2, t_max=400.0, burn_in=20.0, seed=21)
    a = ergodic_average(simulate_grbm(spec, SimConfig(n_paths=8, **base)), lambda s: s[..., 0], 20.0)
    b = ergodic_average(simulate_grbm(spec, SimConfig(n_paths=16, **base)), lambda s: s[..., 0], 20.0)
    assert b["stderr"] / a["stderr"] == pytest.approx(1 / np.sqrt(2), rel=0.3)


def test_ergodic_average_rejects_empty_window():
    spec = GeneratorSpec(one_dim(1.0), exponential())
    ens = simulate_grbm(spec, SimConfig(dt=0.1, t_max=1.0))
    with pytest.raises(ParameterError):
        ergodic_average(ens, lambda s: s[..., 0], 5.0)


def test_beta_limit_requires_orthant_geometry(wedge):
    with pytest.raises(ParameterError):
        beta_limit_compare(wedge, [1.0], SimConfig(dt=0.01, t_max=1.0))


def test_beta_limit_short_run_orders_sup_distance():
    data = orthant([[0.0]], [1.0])
    rows = beta_limit_compare(data, [1.0, 8.0], SimConfig(dt=1e-3, t_max=50.0, burn_in=5.0, n_paths=2, seed=3),
                              path_cfg=SimConfig(dt=1e-4, t_max=5.0, seed=3))
    assert rows[1].sup_distance < rows[0].sup_distance
    assert all(r.ks_exact < 0.1 for r in rows)
