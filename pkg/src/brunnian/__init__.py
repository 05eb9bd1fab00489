"""Few-body bound states, Borromean/Brunnian classification and coupling scans."""

from .model import ParticleSpec, SolveResult, SystemSpec, validate_system
from .potentials import PotentialModel, fit_yukawa, make_core_pocket_tail, make_gaussian
from .solver import EnergyCache, SolverSettings, lowest_threshold, solve_ground_state

__version__ = "0.1.0"

__all__ = [
    "EnergyCache",
    "ParticleSpec",
    "PotentialModel",
    "SolveResult",
    "SolverSettings",
    "SystemSpec",
    "fit_yukawa",
    "lowest_threshold",
    "make_core_pocket_tail",
    "make_gaussian",
    "solve_ground_state",
    "validate_system",
]
