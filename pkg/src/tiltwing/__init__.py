"""Tilt-wing eVTOL takeoff simulation and generative trajectory design."""

from tiltwing.splines import ControlSchedule, bspline_basis, eval_curve
from tiltwing.simulator import AircraftParams, Trajectory, propagate, evaluate_constraints

__version__ = "0.1.0"

__all__ = [
    "AircraftParams",
    "ControlSchedule",
    "Trajectory",
    "bspline_basis",
    "eval_curve",
    "evaluate_constraints",
    "propagate",
    "__version__",
]
