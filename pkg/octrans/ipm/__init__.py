"""Filter line-search interior-point solver for structured NLPs."""

from .filter import Filter
from .kkt import InertiaCorrector, KktSystem, assemble_kkt
from .problem import BarrierProblem
from .reporting import IterationInfo, IterationTable
from .scaling import ProblemScaling, gradient_scale, scale_problem
from .solver import InteriorPointSolver, IpmState, fraction_to_boundary, solve

__all__ = [
    # Solver
    "solve",
    "InteriorPointSolver",
    "IpmState",
    "IterationInfo",
    "IterationTable",
    # KKT
    "KktSystem",
    "InertiaCorrector",
    "assemble_kkt",
    "BarrierProblem",
    # Globalization
    "Filter",
    "fraction_to_boundary",
    # Scaling
    "ProblemScaling",
    "scale_problem",
    "gradient_scale",
]
