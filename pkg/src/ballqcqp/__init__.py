"""Convex relaxations of ball-constrained quadratic programs, a small conic
interior-point solver, and numerical certificates for the lifted relaxation."""

__version__ = "0.1.0"

from .errors import (BallQcqpError, ConfigError, DecompositionNotFound, NumericalError,
                     PreconditionFailed, SchemaError, ShapeError, SizeError)
from .instance import BallQcqpInstance, contains, evaluate_q, example_e1, generate, load, save
from .ipm import SolverSettings, SolveResult, Status, solve
from .oracle import OracleResult, global_min, project_feasible
from .relaxations import RelaxationKind, build, solve_relaxation

__all__ = [
    "BallQcqpError", "ConfigError", "DecompositionNotFound", "NumericalError",
    "PreconditionFailed", "SchemaError", "ShapeError", "SizeError",
    "BallQcqpInstance", "contains", "evaluate_q", "example_e1", "generate", "load", "save",
    "SolverSettings", "SolveResult", "Status", "solve",
    "OracleResult", "global_min", "project_feasible",
    "RelaxationKind", "build", "solve_relaxation",
]
