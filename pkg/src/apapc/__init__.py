"""Accelerated primal-dual splitting with per-step convergence certificates."""

from .errors import (
    ConfigurationError,
    EstimationError,
    InputError,
    InsufficientDataError,
    IterationError,
    OracleError,
    VerificationError,
)
from .linops import LinearMap, SpectralBounds, estimate_spectral_bounds
from .schedules import MomentumSchedule
from .solvers import SolveConfig, SolverState, Trace, run
from .problems import ProblemInstance, generate

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "EstimationError",
    "InputError",
    "InsufficientDataError",
    "IterationError",
    "OracleError",
    "VerificationError",
    "LinearMap",
    "SpectralBounds",
    "estimate_spectral_bounds",
    "MomentumSchedule",
    "SolveConfig",
    "SolverState",
    "Trace",
    "run",
    "ProblemInstance",
    "generate",
]
