"""Command-line experiment runner.

Every command reads one ``grbm-config/1`` document (``--config`` or
``--preset``) and writes CSV or JSON to ``--out`` (default stdout).

Output columns
  validate            JSON report: violations, skew-symmetry defect, drift parameters
  density             x_1..x_d,logp for points drawn from the density; trailing ``# Z,<value>,<error>,<method>``
  bar-check           x_1..x_d,residual_fd,residual_analytic
  simulate            path_id,t,x_1..x_d (``--format binary`` writes the GRBM1 layout)
  compare-stationary  coordinate,ks,p_value,n,mean,law_mean
  speed               alpha,psi,gamma (Psi tabulated on a geometric grid ``psi_grid = [lo, hi, points]``)
  particles           path_id,t,x_1..x_n
  pitman transform    t,eta_1..eta_m,T_1..T_m
  pitman word         t,eta_1..eta_m,y_1..y_q,final_1..final_m
  pitman ysim         path_id,t,x_1..x_q
  pitman chain        sample_id,J_1..J_depth
  dufresne            JSON: parameters, KS report against Gamma(mu), moments, samples
  beta-limit          beta,sup_distance,ks,ks_exact

Exit status: 0 success, 1 configuration error, 2 invalid reflection data,
3 numerical failure.  Errors are reported as JSON on stderr.
"""
from __future__ import annotations

import argparse
import io
import json
import os
import sys
from typing import Optional

import numpy as np
from scipy.stats import gamma as gamma_law

from . import density as _density
from .adjoint import GeneratorSpec, adjoint_residual_analytic, adjoint_residual_fd, density_points
from .config import ConfigError, ExperimentConfig
from .domain import Kind, delta_drift, gamma_drift, skew_symmetry_defect, theta_parameters, validate
from .dufresne import dufresne_sample
from .errors import DimensionError, GRBMError, InvalidDataError, NumericalError, ParameterError
from .particles import equilibrium_speed, simulate_particles, step_speed
from .pitman import (PathGrid, chain_samples, compose_word, generalized_transform, pitman_transform,
                     uniform_grid, y_sde_simulate)
from .presets import NAMES, particles_from_options, preset, word_from_options
from .sde import PathEnsemble, SimConfig, beta_limit_compare, path_streams, simulate_grbm
from .stats import empirical_moments, ks_statistic

EXIT_CONFIG, EXIT_INVALID, EXIT_NUMERIC = 1, 2, 3
COMMANDS = ("validate", "density", "bar-check", "simulate", "compare-stationary", "speed", "particles",
            "pitman", "dufresne", "beta-limit")
PITMAN_MODES = ("transform", "word", "ysim", "chain")


def _fmt(v) -> str:
    return f"{float(v):.17g}"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(r if isinstance(r, str) else _fmt(r) for r in row) + "\n")
    return buf.getvalue()


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _ensemble_csv(ens: PathEnsemble) -> str:
    buf = io.StringIO()
    ens.to_csv(buf)
    return buf.getvalue()


def _spec(cfg: ExperimentConfig) -> GeneratorSpec:
    return GeneratorSpec(cfg.data, cfg.U)


def _opt(cfg: ExperimentConfig, section: str) -> dict:
    return dict(cfg.options.get(section, {}))


# --------------------------------------------------------------------------
# commands


def cmd_validate(cfg: ExperimentConfig, args) -> str:
    data = cfg.data
    report = validate(data)
    doc = {"config": cfg.name, "digest": cfg.digest(), "kind": data.kind.value, **report.to_dict()}
    if report.valid:
        doc["skew_symmetry"] = skew_symmetry_defect(data).to_dict()
        drift = delta_drift(data) if data.kind is Kind.ORTHANT else gamma_drift(data)
        doc["drift_parameters"] = drift.tolist()
        doc["theta"] = theta_parameters(data).tolist()
    else:
        args._exit = EXIT_INVALID
    return _json(doc)


def _normalization(cfg, spec):
    """Closed form for product-form densities, adaptive quadrature otherwise."""
    data = cfg.data
    if spec.marginal_params is not None:
        laws = _density.product_marginals(data, cfg.U)
        x0 = np.zeros((1, data.d))
        y0 = x0 @ data.N.T - data.b
        logZ = float(spec.log_density(x0)[0]) - sum(float(law.logpdf(y0[0, j])) for j, law in enumerate(laws))
        return np.exp(logZ) / abs(np.linalg.det(data.N)), 0.0, "closed-form"
    res = _density.normalization(spec, "quadrature", tol=1e-8)
    return res.Z, res.error, res.method


def cmd_density(cfg: ExperimentConfig, args) -> str:
    o = _opt(cfg, "density")
    spec = _density.density_spec(cfg.data, cfg.U)
    x = density_points(_spec(cfg), int(o.get("points", 20)), cfg.sim.seed)
    logp = spec.log_density(x)
    Z, err, method = _normalization(cfg, spec)
    d = cfg.data.d
    out = _csv([f"x_{i + 1}" for i in range(d)] + ["logp"], [list(xi) + [lp] for xi, lp in zip(x, logp)])
    return out + f"# Z,{_fmt(Z)},{_fmt(err)},{method}\n"


def cmd_bar_check(cfg: ExperimentConfig, args) -> str:
    o = _opt(cfg, "bar_check")
    spec = _spec(cfg)
    x = density_points(spec, int(o.get("points", 100)), cfg.sim.seed)
    h = float(o.get("h", 1e-3))
    rows = [list(xi) + [adjoint_residual_fd(spec, xi, h), adjoint_residual_analytic(spec, xi)] for xi in x]
    return _csv([f"x_{i + 1}" for i in range(cfg.data.d)] + ["residual_fd", "residual_analytic"], rows)


def _write_ensemble(ens: PathEnsemble, args):
    if args.format == "binary":
        if not args.out:
            raise ConfigError("--format binary needs --out")
        return ens.to_binary()
    return _ensemble_csv(ens)


def cmd_simulate(cfg: ExperimentConfig, args):
    return _write_ensemble(simulate_grbm(_spec(cfg), cfg.sim), args)


def cmd_compare_stationary(cfg: ExperimentConfig, args) -> str:
    data = cfg.data
    laws = _density.product_marginals(data, cfg.U)
    ens = simulate_grbm(_spec(cfg), cfg.sim)
    y = ens.after(cfg.sim.burn_in) @ data.N.T - data.b
    rows = []
    for j, law in enumerate(laws):
        col = y[..., j].ravel()
        ks = ks_statistic(col, law.cdf)
        rows.append([str(j + 1), ks.D, ks.p_value, str(ks.n), float(col.mean()), law.mean])
    return _csv(["coordinate", "ks", "p_value", "n", "mean", "law_mean"], rows)


def cmd_speed(cfg: ExperimentConfig, args) -> str:
    o = _opt(cfg, "speed")
    alphas = np.asarray(o.get("alphas", [0.5, 1.0, 2.0, 4.0]), dtype=float)
    lo, hi, points = o.get("psi_grid", [0.02, 50.0, 400])
    grid = np.geomspace(lo, hi, int(points))
    U = cfg.U
    table = np.array([equilibrium_speed(U, float(a)) for a in grid])
    psi = np.array([equilibrium_speed(U, float(a)) for a in alphas])
    gam = step_speed(grid, table, alphas)
    return _csv(["alpha", "psi", "gamma"], zip(alphas, psi, np.atleast_1d(gam)))


def cmd_particles(cfg: ExperimentConfig, args):
    pc = particles_from_options(cfg.options, cfg.U)
    return _write_ensemble(simulate_particles(pc, cfg.sim), args)


def _driver(cfg: ExperimentConfig, m: int) -> PathGrid:
    """Brownian motion with drift ``eta_drift`` in ``R^m`` on ``dt, .., t_max`` from ``pitman.{dt,t_max}``."""
    o = _opt(cfg, "pitman")
    dt = float(o.get("dt", 1e-3))
    t_max = float(o.get("t_max", 10.0))
    mu = np.asarray(cfg.options.get("eta_drift", np.zeros(m)), dtype=float)
    t = uniform_grid(t_max, dt)
    g = path_streams(cfg.sim.seed, 1)[0]
    B = np.cumsum(g.standard_normal((t.size, m)) * np.sqrt(dt), axis=0)
    return PathGrid(t, B + t[:, None] * mu[None, :])


def cmd_pitman(cfg: ExperimentConfig, args):
    mode = args.mode
    if mode == "chain":
        o = _opt(cfg, "chain")
        depth = int(o.get("depth", 3))
        J = chain_samples(float(o.get("drift", 1.0)), depth, int(o.get("n", 200)), cfg.sim.seed,
                          float(o.get("t_inf", 60.0)), float(o.get("dt", 0.01)))
        return _csv(["sample_id"] + [f"J_{k + 1}" for k in range(depth)],
                    ([str(i)] + list(row) for i, row in enumerate(J)))
    w = word_from_options(cfg.options)
    if mode == "ysim":
        mu = cfg.options.get("eta_drift", np.zeros(w.m))
        return _write_ensemble(y_sde_simulate(w, cfg.U, mu, cfg.sim), args)
    eta = _driver(cfg, w.m)
    m = w.m
    names = [f"eta_{i + 1}" for i in range(m)]
    if mode == "transform":
        alpha = w.gammas[0]
        if cfg.potential["name"] == "exponential":
            T = pitman_transform(eta, alpha)
        else:
            T = generalized_transform(eta, alpha, cfg.U)
        rows = np.column_stack([eta.times, eta.values, T.values])
        return _csv(["t"] + names + [f"T_{i + 1}" for i in range(m)], rows)
    if mode == "word":
        res = compose_word(eta, w)
        rows = np.column_stack([eta.times, eta.values, res.ys, res.etas[-1].values])
        header = ["t"] + names + [f"y_{k + 1}" for k in range(w.q)] + [f"final_{i + 1}" for i in range(m)]
        return _csv(header, rows)
    raise ConfigError(f"unknown pitman mode {mode!r}")


def cmd_dufresne(cfg: ExperimentConfig, args) -> str:
    o = _opt(cfg, "dufresne")
    mu = float(o.get("mu", cfg.data.mu[0]))
    t_inf = float(o.get("t_inf", 20.0))
    n = int(o.get("n", 10_000))
    dt = float(o.get("dt", 5e-3))
    x = dufresne_sample(mu, t_inf, n, cfg.sim.seed, dt)
    ks = ks_statistic(x, gamma_law(mu).cdf)
    mom = empirical_moments(x)
    doc = {
        "mu": mu, "t_inf": t_inf, "n": n, "dt": dt, "seed": int(cfg.sim.seed),
        "ks": {"D": ks.D, "p_value": ks.p_value, "reference": f"Gamma({mu:g})"},
        "mean": {"estimate": mom["mean"][0], "stderr": mom["mean"][1], "expected": mu},
        "variance": {"estimate": mom["variance"][0], "stderr": mom["variance"][1], "expected": mu},
        "samples": x.tolist(),
    }
    return _json(doc)


def cmd_beta_limit(cfg: ExperimentConfig, args) -> str:
    o = _opt(cfg, "beta_limit")
    betas = [float(b) for b in o.get("betas", [1.0, 4.0, 16.0])]
    path_cfg = SimConfig(dt=float(o.get("path_dt", cfg.sim.dt)), t_max=float(o.get("path_t_max", 20.0)),
                         seed=cfg.sim.seed, x0=cfg.sim.x0)
    rows = beta_limit_compare(cfg.data, betas, cfg.sim, path_cfg=path_cfg)
    return _csv(["beta", "sup_distance", "ks", "ks_exact"],
                ([r.beta, r.sup_distance, r.ks, r.ks_exact] for r in rows))


HANDLERS = {
    "validate": cmd_validate,
    "density": cmd_density,
    "bar-check": cmd_bar_check,
    "simulate": cmd_simulate,
    "compare-stationary": cmd_compare_stationary,
    "speed": cmd_speed,
    "particles": cmd_particles,
    "pitman": cmd_pitman,
    "dufresne": cmd_dufresne,
    "beta-limit": cmd_beta_limit,
}


# --------------------------------------------------------------------------
# driver


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="grbm", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("mode", nargs="?", choices=PITMAN_MODES, help="subcommand of pitman")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", help="path to a grbm-config/1 JSON document")
    src.add_argument("--preset", choices=NAMES, help="bundled configuration")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--seed", type=int, help="override sim.seed (unsigned 64-bit)")
    p.add_argument("--threads", type=int, help="worker threads (default $GRBM_THREADS)")
    p.add_argument("--format", choices=("csv", "binary"), default="csv", help="ensemble output format")
    return p


def _set_threads(n: Optional[int]) -> None:
    if n is None:
        env = os.environ.get("GRBM_THREADS")
        if not env:
            return
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"GRBM_THREADS must be an integer, got {env!r}") from exc
    import numba

    if not 1 <= n:
        raise ConfigError("thread count must be positive")
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def run(command: str, config_path: Optional[str] = None, output_path: Optional[str] = None, *,
        preset_name: Optional[str] = None, seed: Optional[int] = None, mode: Optional[str] = None,
        threads: Optional[int] = None, fmt: str = "csv") -> int:
    """Execute one command and return the exit status."""
    argv = [command] + ([mode] if mode else [])
    if config_path:
        argv += ["--config", str(config_path)]
    if preset_name:
        argv += ["--preset", preset_name]
    if output_path:
        argv += ["--out", str(output_path)]
    if seed is not None:
        argv += ["--seed", str(seed)]
    if threads is not None:
        argv += ["--threads", str(threads)]
    argv += ["--format", fmt]
    return main(argv)


def _error(exc: Exception, code: int) -> int:
    doc = {"error": type(exc).__name__, "exit_code": code, "message": str(exc)}
    sys.stderr.write(json.dumps(doc, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args._exit = 0
        if args.command == "pitman" and args.mode is None:
            raise ConfigError(f"pitman needs a mode: {', '.join(PITMAN_MODES)}")
        if args.command != "pitman" and args.mode is not None:
            raise ConfigError(f"{args.command} takes no mode")
        if args.preset:
            cfg = preset(args.preset)
        elif args.config:
            cfg = ExperimentConfig.load(args.config)
        else:
            raise ConfigError("one of --config or --preset is required")
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        _set_threads(args.threads)
        out = HANDLERS[args.command](cfg, args)
        if args.out:
            with open(args.out, "wb") as fh:
                fh.write(out if isinstance(out, bytes) else out.encode())
        else:
            sys.stdout.write(out)
        return args._exit
    except InvalidDataError as exc:
        return _error(exc, EXIT_INVALID)
    except NumericalError as exc:
        return _error(exc, EXIT_NUMERIC)
    except (ConfigError, ParameterError, DimensionError) as exc:
        return _error(exc, EXIT_CONFIG)
    except GRBMError as exc:
        return _error(exc, EXIT_CONFIG)
    except OSError as exc:
        return _error(exc, EXIT_CONFIG)


if __name__ == "__main__":
    sys.exit(main())
