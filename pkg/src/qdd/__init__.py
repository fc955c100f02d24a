"""Quantum drift-diffusion with Bohm potential and self-interaction.

Structure-preserving time stepping (positivity, mass, entropy) on slab and
radially symmetric grids, the classical limit with a blowup detector, and
randomised checks of the functional inequalities behind the entropy bound.
"""

from .errors import (BoundaryConditionError, CoefficientNotPositive, ConfigError,
                     DegenerateRatio, DeltaTooLarge, GridError, NewtonDiverged,
                     PicardDiverged, QDDError, SolvabilityViolation, StepFailed)
from .grid import BC, DensityState, Geometry, Grid, ScalarField, build_grid, integrate
from .scheme import ModelParams, StepConfig, Trajectory, evolve, step

__version__ = "0.1.0"

__all__ = [
    "BC", "DensityState", "Geometry", "Grid", "ScalarField", "build_grid", "integrate",
    "ModelParams", "StepConfig", "Trajectory", "evolve", "step",
    "QDDError", "GridError", "BoundaryConditionError", "CoefficientNotPositive",
    "SolvabilityViolation", "NewtonDiverged", "PicardDiverged", "StepFailed",
    "DeltaTooLarge", "DegenerateRatio", "ConfigError",
]
