"""Nonlinear Schrodinger ground states and functional inequalities on grid graphs.

The lattice Z^d, truncated to a cube of radius R, is read as a metric graph
whose edges all have length ell. Fields are continuous and piecewise linear
on a uniform mesh of every edge.
"""
from ._backend import BACKEND
from .functions import (
    GraphFunction,
    Mesh,
    build_mesh,
    derivative_l1,
    derivative_l2_sq,
    energy,
    energy_gradient,
    lp_norm,
    mass,
    sample,
    sup_norm,
)
from .grid import Boundary, GridSpec, MetricGrid, build_grid, validate
from .ground_state import SolverConfig, estimate_critical_mass, minimize, phase_diagram
from .inequalities import Form, InequalityReport, check

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Boundary", "Form", "GraphFunction", "GridSpec", "InequalityReport", "Mesh",
    "MetricGrid", "SolverConfig", "build_grid", "build_mesh", "check", "derivative_l1",
    "derivative_l2_sq", "energy", "energy_gradient", "estimate_critical_mass", "lp_norm",
    "mass", "minimize", "phase_diagram", "sample", "sup_norm", "validate",
]
