"""Bundled experiment configurations for the worked examples.

The JSON files under ``presets/`` are generated by :func:`build_preset`;
:func:`preset` reads the bundled file so that the command line and the
library see the same bytes.
"""
from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig
from .domain import ReflectionData, orthant
from .particles import ParticleConfig, gap_data
from .pitman import Word, longest_element_word, word_data
from .potential import exponential
from .sde import SimConfig

NAMES = (
    "dufresne-1d",
    "wedge-2d",
    "orthant-hr",
    "tasep-n3",
    "tasep-n5",
    "pitman-a2-longest",
    "alternating-1d",
    "weyl-chamber-n4",
)

_EXP = {"name": "exponential", "params": {}}


def wedge_data(phi: float = np.pi / 3, c: float = 0.5, mu=(0.5, 1.0)) -> ReflectionData:
    """Two faces with normals ``(1, 0)`` and ``(-cos phi, sin phi)``; ``q_j = c R n_j`` with ``R`` a quarter turn."""
    N = np.array([[1.0, 0.0], [-np.cos(phi), np.sin(phi)]])
    R = np.array([[0.0, -1.0], [1.0, 0.0]])
    return ReflectionData(N=N, Q=c * N @ R.T, b=np.zeros(2), mu=mu)


def helmert_basis(n: int) -> np.ndarray:
    """Orthonormal basis (columns) of the sum-zero hyperplane of ``R^n``."""
    H = np.zeros((n, n - 1))
    for j in range(1, n):
        H[:j, j - 1] = 1.0
        H[j, j - 1] = -float(j)
        H[:, j - 1] /= np.linalg.norm(H[:, j - 1])
    return H


def weyl_data(drifts=(1.5, 0.5, -0.5, -1.5)) -> tuple:
    """Chamber ``x_1 > .. > x_n`` written in coordinates of the sum-zero hyperplane.

    The centre of mass moves freely and is dropped, which leaves ``n - 1``
    faces in ``n - 1`` dimensions with normal reflection.
    """
    n = len(drifts)
    H = helmert_basis(n)
    roots = np.array([(np.eye(n)[j] - np.eye(n)[j + 1]) / np.sqrt(2.0) for j in range(n - 1)])
    N = roots @ H
    mu = H.T @ np.asarray(drifts, dtype=float)
    return ReflectionData(N=N, Q=np.zeros_like(N), b=np.zeros(n - 1), mu=mu), H


def build_preset(name: str) -> ExperimentConfig:
    if name == "dufresne-1d":
        data = ReflectionData(N=[[1.0]], Q=[[0.0]], b=[0.0], mu=[1.0])
        sim = SimConfig(dt=1e-3, t_max=2000.0, burn_in=50.0, seed=20240501, n_paths=20, thin=10)
        opts = {
            "dufresne": {"mu": 2.0, "t_inf": 20.0, "n": 100000, "dt": 0.005},
            "beta_limit": {"betas": [1.0, 4.0, 16.0], "path_t_max": 20.0, "path_dt": 1e-4},
            "speed": {"alphas": [0.5, 1.0, 2.0, 4.0], "psi_grid": [0.02, 50.0, 400]},
        }
        return ExperimentConfig(name, data, _EXP, sim, opts)
    if name == "wedge-2d":
        sim = SimConfig(dt=1e-3, t_max=500.0, burn_in=20.0, seed=20240502, n_paths=8, thin=10)
        return ExperimentConfig(name, wedge_data(), _EXP, sim, {"bar_check": {"points": 100, "h": 1e-3}})
    if name == "orthant-hr":
        data = orthant([[0.0, -0.4], [-0.2, 0.0]], [1.0, 1.0], [[1.0, -0.3], [-0.3, 1.0]])
        sim = SimConfig(dt=1e-3, t_max=500.0, burn_in=20.0, seed=20240503, n_paths=8, thin=10)
        return ExperimentConfig(name, data, _EXP, sim, {"bar_check": {"points": 100, "h": 1e-3}})
    if name in ("tasep-n3", "tasep-n5"):
        n = 3 if name == "tasep-n3" else 5
        nu = [1.0] + [0.0] * (n - 1)
        data = gap_data(ParticleConfig(n, nu, exponential()))
        sim = SimConfig(dt=1e-3, t_max=1000.0, burn_in=50.0, seed=20240504 + n, n_paths=8, thin=10)
        opts = {"particles": {"n": n, "nu": nu, "drift_convention": "generator"},
                "bar_check": {"points": 100, "h": 1e-3}}
        return ExperimentConfig(name, data, _EXP, sim, opts)
    if name == "pitman-a2-longest":
        w = longest_element_word(3)
        mu = [-1.0, 0.0, 1.0]
        sim = SimConfig(dt=1e-3, t_max=2000.0, burn_in=20.0, seed=20240510, n_paths=8, thin=10)
        opts = {"word": {"gammas": w.gammas.tolist()}, "eta_drift": mu,
                "bar_check": {"points": 100, "h": 1e-3}}
        return ExperimentConfig(name, word_data(w, mu), _EXP, sim, opts)
    if name == "alternating-1d":
        s = np.sqrt(2.0)
        w = Word(np.array([[s], [-s], [s], [-s]]))
        mu = [-1.0 / s]
        sim = SimConfig(dt=1e-3, t_max=1000.0, burn_in=20.0, seed=20240511, n_paths=8, thin=10)
        opts = {"word": {"gammas": w.gammas.tolist()}, "eta_drift": mu, "chain": {"depth": 3, "drift": 1.0}}
        return ExperimentConfig(name, word_data(w, mu), _EXP, sim, opts)
    if name == "weyl-chamber-n4":
        drifts = [1.5, 0.5, -0.5, -1.5]
        data, H = weyl_data(drifts)
        sim = SimConfig(dt=1e-3, t_max=500.0, burn_in=20.0, seed=20240512, n_paths=8, thin=10)
        opts = {"embedding": H.tolist(), "particle_drift": drifts, "bar_check": {"points": 100, "h": 1e-3}}
        return ExperimentConfig(name, data, _EXP, sim, opts)
    raise ConfigError(f"unknown preset {name!r}; choose from {list(NAMES)}")


def preset_path(name: str):
    return resources.files("grbm").joinpath("presets", f"{name}.json")


def preset(name: str) -> ExperimentConfig:
    """The bundled configuration ``name``."""
    if name not in NAMES:
        raise ConfigError(f"unknown preset {name!r}; choose from {list(NAMES)}")
    return ExperimentConfig.from_json(preset_path(name).read_text())


def export_presets(directory) -> list:
    """Write every preset as ``<name>.json`` into ``directory``."""
    out = []
    for name in NAMES:
        path = Path(directory) / f"{name}.json"
        path.write_text(build_preset(name).to_json() + "\n")
        out.append(path)
    return out


def word_from_options(options: dict) -> Word:
    spec = options.get("word")
    if spec is None:
        raise ConfigError("options.word is required")
    if "gammas" in spec:
        return Word(np.array(spec["gammas"], dtype=float))
    return Word.from_simple(int(spec["n"]), spec["letters"])


def particles_from_options(options: dict, U) -> ParticleConfig:
    spec = options.get("particles")
    if spec is None:
        raise ConfigError("options.particles is required")
    return ParticleConfig(int(spec["n"]), spec["nu"], U, spec.get("drift_convention", "generator"))
