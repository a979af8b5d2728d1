"""Shared domain types: configuration, controls, grid functions, nonlinearities, problems."""
from .config import (ControlMatrix, ControlSet, OperatorConfig, fractional_laplacian_constant,
                     sphere_area)
from .functions import (AnalyticTerm, Box, ExteriorRule, GridFunction, MissingTailError,
                        UnsupportedTagError, check_Ls_membership, make_grid_function)
from .nonlinearity import Nonlinearity, hypothesis_report
from .problem import Geometry, ProblemSpec, ValidationError, lattice_box

__all__ = [
    "AnalyticTerm", "Box", "ControlMatrix", "ControlSet", "ExteriorRule", "Geometry",
    "GridFunction", "MissingTailError", "Nonlinearity", "OperatorConfig", "ProblemSpec",
    "UnsupportedTagError", "ValidationError", "check_Ls_membership", "fractional_laplacian_constant",
    "hypothesis_report", "lattice_box", "make_grid_function", "sphere_area",
]
