"""Hydrodynamic limits and large deviations for lattice reaction-diffusion systems."""
from .errors import HdldevError
from .lattice import (DensityPath, InitialProfile, Perturbation, RateFunction, ReactionSpec,
                      ScalingLaw, TorusGrid, validate_perturbation_strength)
from .config import RunConfig, load_config, parse_config
from .ctmc import BACKEND, SimParams, simulate
from .spectral import SpectralBasis, semigroup_apply
from .pde import SemiDiscreteProblem, reference_solution, solve_semidiscrete_rk
from .ldp import j_functional, rate_closed_form, solve_elliptic_for_h

__version__ = "0.1.0"

__all__ = [
    "HdldevError", "DensityPath", "InitialProfile", "Perturbation", "RateFunction", "ReactionSpec",
    "ScalingLaw", "TorusGrid", "validate_perturbation_strength", "RunConfig", "load_config",
    "parse_config", "BACKEND", "SimParams", "simulate", "SpectralBasis", "semigroup_apply",
    "SemiDiscreteProblem", "reference_solution", "solve_semidiscrete_rk", "j_functional",
    "rate_closed_form", "solve_elliptic_for_h",
]
