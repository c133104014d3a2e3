"""Poisson benchmark and porous-convection drivers."""

from .convection import (
    ConvectionConfig,
    ConvectionModel,
    ConvectionResult,
    ConvectionState,
    PressureSolveError,
    darcy_flux,
    initial_temperature,
    integrate_convection,
    rmse_over_time,
    temperature_rhs,
    write_rmse_csv,
    write_trajectory_csv,
)
from .poisson import (
    POISSON_SOLVERS,
    PoissonConfig,
    per_cycle_time,
    poisson_rhs_divrho,
    poisson_rhs_random,
    solve_poisson,
)
from .rk import DP54, StepSizeUnderflow, integrate

__all__ = [
    "ConvectionConfig",
    "ConvectionModel",
    "ConvectionResult",
    "ConvectionState",
    "PressureSolveError",
    "darcy_flux",
    "initial_temperature",
    "integrate_convection",
    "rmse_over_time",
    "temperature_rhs",
    "write_rmse_csv",
    "write_trajectory_csv",
    "POISSON_SOLVERS",
    "PoissonConfig",
    "per_cycle_time",
    "poisson_rhs_divrho",
    "poisson_rhs_random",
    "solve_poisson",
    "DP54",
    "StepSizeUnderflow",
    "integrate",
]
