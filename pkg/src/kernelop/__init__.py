"""Physics-informed kernel ridge regression for linear PDE solution operators."""

from .errors import (
    CapabilityError,
    ConfigurationError,
    KernelOpError,
    NumericalError,
    ShapeError,
)
from .kernel import GaussianKernel, MultiIndex
from .lowrank import LowRankModel, select_centers, stream_fit
from .metrics import ErrorReport, fit_rate, lambda_schedule, relative_errors
from .operators import OperatorTerm, PdeOperator, ProductWindow, Region
from .problems import PROBLEMS, get_problem
from .sampling import BoxDomain, LabeledSampleSet, sample_problem_points
from .solver import SolutionOperator, SolverConfig, assemble_gram, fit, fit_operator

__version__ = "0.1.0"

__all__ = [
    "BoxDomain",
    "CapabilityError",
    "ConfigurationError",
    "ErrorReport",
    "GaussianKernel",
    "KernelOpError",
    "LabeledSampleSet",
    "LowRankModel",
    "MultiIndex",
    "NumericalError",
    "OperatorTerm",
    "PROBLEMS",
    "PdeOperator",
    "ProductWindow",
    "Region",
    "ShapeError",
    "SolutionOperator",
    "SolverConfig",
    "assemble_gram",
    "fit",
    "fit_operator",
    "fit_rate",
    "get_problem",
    "lambda_schedule",
    "relative_errors",
    "sample_problem_points",
    "select_centers",
    "stream_fit",
]
