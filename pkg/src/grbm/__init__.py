"""Generalised reflected Brownian motion: product-form densities, simulation and path transforms."""
from .adjoint import GeneratorSpec, adjoint_residual_analytic, adjoint_residual_fd, drift_field
from .config import ConfigError, ExperimentConfig
from .density import LogGammaLaw, density_spec, log_density, loggamma_marginal, normalization
from .domain import (Kind, ReflectionData, find_invertible_submatrix, gamma_drift, orthant, skew_symmetry_defect,
                     theta_parameters, validate)
from .errors import GRBMError, InvalidDataError, NumericalError, ParameterError
from .potential import Potential, beta_exponential, exponential, softplus
from .presets import preset
from .sde import PathEnsemble, SimConfig, simulate_grbm, skorokhod_reflect

__version__ = "0.1.0"
