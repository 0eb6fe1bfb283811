"""Cluster statistics and large deviations of sparse multi-type random graphs."""

from .measures import MacroMeasure, MicroMeasure, ModelError, TypeSpace
from .solvers import sigma, solve_b_star, solve_characteristic, solve_survival
from .trees import tau_closed_form, tau_enumerate, tau_matrix_tree

__version__ = "0.1.0"

__all__ = [
    "MacroMeasure", "MicroMeasure", "ModelError", "TypeSpace",
    "sigma", "solve_b_star", "solve_characteristic", "solve_survival",
    "tau_closed_form", "tau_enumerate", "tau_matrix_tree",
]
