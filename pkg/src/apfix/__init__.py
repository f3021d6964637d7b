"""Almost-periodic solutions of the delayed hematopoiesis model."""

from .apexpr import APExpr, estimate_bounds, mean_value, antiderivative, derive_oscillation_bound
from .errors import (ApfixError, DomainError, GridError, HypothesisViolation, InsufficientHistory,
                     RegimeUnsupported, SandwichViolation, UnsupportedCoefficient)
from .fixedpoint import SolveSettings, iterate, solve
from .grid import GridFunction
from .model import ModelParams, Term, check, check_theorem1, check_theorem2, compute_B, compute_V, threshold_A
from .operators import flux, h_trunc, phi_apply, tail_length
from .verify import dde_integrate, ode_residual, verify_solution, voc_check

__all__ = [
    "APExpr", "estimate_bounds", "mean_value", "antiderivative", "derive_oscillation_bound",
    "ApfixError", "DomainError", "GridError", "HypothesisViolation", "InsufficientHistory",
    "RegimeUnsupported", "SandwichViolation", "UnsupportedCoefficient",
    "SolveSettings", "iterate", "solve", "GridFunction",
    "ModelParams", "Term", "check", "check_theorem1", "check_theorem2", "compute_B", "compute_V", "threshold_A",
    "flux", "h_trunc", "phi_apply", "tail_length",
    "dde_integrate", "ode_residual", "verify_solution", "voc_check",
]

__version__ = "0.1.0"
