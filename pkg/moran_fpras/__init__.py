"""Simulation, exact solving and randomized approximation for the Moran process on graphs."""

from importlib.metadata import PackageNotFoundError, version

from .dynamics import MutantState, Outcome, RngStream, TrajectoryResult, run_to_absorption, step
from .estimator import EstimateReport, EstimatorMode, EstimatorPlan, Status, estimate, plan
from .exact import BoundsReport, ExactResult, bounds_report, fixation_exact
from .exceptions import MoranError
from .graph import Graph, generate, parse_edge_list, read_edge_list, write_edge_list

try:
    __version__ = version("moran-fpras")
except PackageNotFoundError:
    __version__ = "0.0.0+local"

__all__ = [
    "BoundsReport",
    "EstimateReport",
    "EstimatorMode",
    "EstimatorPlan",
    "ExactResult",
    "Graph",
    "MoranError",
    "MutantState",
    "Outcome",
    "RngStream",
    "Status",
    "TrajectoryResult",
    "__version__",
    "bounds_report",
    "estimate",
    "fixation_exact",
    "generate",
    "parse_edge_list",
    "plan",
    "read_edge_list",
    "run_to_absorption",
    "step",
    "write_edge_list",
]
