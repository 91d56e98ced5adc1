"""Trust-region patch decomposition for TV-regularized integer control problems."""
from .control import ControlField, ValueSet, l1_distance, splice, tv, tv_restricted
from .exceptions import ContractViolation, CoverError, InvalidArgument, PatchTooLarge, SolverFailure
from .grid import Grid, build_grid
from .models import ConvectionDiffusionModel, ConvolutionModel, QuadraticModel, gradient_check
from .patches import PatchSet, make_uniform_patches, validate_cover, whole_domain
from .slip import RunResult, SlipConfig, run, run_slip
from .trsub import TrustRegionSubproblem, solve

__version__ = "0.1.0"

__all__ = [
    "ControlField", "ValueSet", "l1_distance", "splice", "tv", "tv_restricted",
    "ContractViolation", "CoverError", "InvalidArgument", "PatchTooLarge", "SolverFailure",
    "Grid", "build_grid",
    "ConvectionDiffusionModel", "ConvolutionModel", "QuadraticModel", "gradient_check",
    "PatchSet", "make_uniform_patches", "validate_cover", "whole_domain",
    "RunResult", "SlipConfig", "run", "run_slip",
    "TrustRegionSubproblem", "solve",
]
