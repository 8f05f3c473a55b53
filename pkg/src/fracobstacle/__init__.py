"""Obstacle problems for the drifted fractional Laplacian ``(-Delta)^s + b.grad + c``
in the subcritical range ``1/2 < s < 1``: solvers, a Monte Carlo check of
the optimal stopping representation, and free-boundary diagnostics through
the extension problem."""

from .core import CoefficientSpec, FractionalOrder, GridSpec, ProblemSpec, ScalarField
from .obstacle import lcp_active_set, lcp_oracle, obstacle_solve, penalized_solve
from .scenario import Scenario, load_scenario, parse_scenario

__all__ = [
    "CoefficientSpec", "FractionalOrder", "GridSpec", "ProblemSpec", "ScalarField",
    "lcp_active_set", "lcp_oracle", "obstacle_solve", "penalized_solve",
    "Scenario", "load_scenario", "parse_scenario",
]
__version__ = "0.1.0"
