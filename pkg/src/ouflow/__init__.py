"""Explicit evolution systems for the linearized Navier-Stokes flow past a
rotating and translating obstacle, with L^p-L^q decay studies and Kato-type
mild solutions of the nonlinear problem."""

from .errors import (
    ConvergenceError, DivergenceError, DomainTruncationError, FitQualityError, NearSingularGramError,
    NonContractionError, NumericalError, OutOfBoxError, OuflowError, ValidationError,
)
from .evolution_op import apply_grad_T, apply_T, apply_T_planewave, evolution_law_check, pde_residual
from .field_grid import Grid, VectorField, helmholtz_project, lp_norm, read_field, write_field
from .gaussian_kernel import gram_scaling_report, kernel_eval, make_params
from .kato_solver import MildSolution, duhamel_step, solve_mild, weighted_norm_profile
from .matrix_flow import bound_constant, drift_offset, gram, propagate
from .signals import MatrixSignal, VectorSignal

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError", "DivergenceError", "DomainTruncationError", "FitQualityError",
    "NearSingularGramError", "NonContractionError", "NumericalError", "OutOfBoxError", "OuflowError",
    "ValidationError", "apply_grad_T", "apply_T", "apply_T_planewave", "evolution_law_check",
    "pde_residual", "Grid", "VectorField", "helmholtz_project", "lp_norm", "read_field",
    "write_field", "gram_scaling_report", "kernel_eval", "make_params", "MildSolution",
    "duhamel_step", "solve_mild", "weighted_norm_profile", "bound_constant", "drift_offset", "gram",
    "propagate", "MatrixSignal", "VectorSignal",
]
