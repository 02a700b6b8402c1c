"""Nonparametric estimation of random-coefficient densities.

The linear model ``Y = b0 + b1 X1 + ...`` with random coefficients is
inverted on a grid by regularised maximum likelihood.
"""

from .grid import Grid, cell_center, cell_of_point, make_grid
from .io import (DensityDump, emit_plot_data, read_csv, read_dump, write_csv,
                 write_dump)
from .likelihood import (DensityEstimate, PenaltyKind, neg_avg_loglik,
                         objective, penalty)
from .operator import (OperatorMatrix, build_operator, dump_operator,
                       load_operator, transmatrix)
from .results import expected_value, marginal_2d, maxval, modes
from .select import AlphaLadder, cv_select, halving_search, lepskii
from .shift import shift_estimate
from .simulate import sim_sample
from .solver import (EstimationReport, SolverError, SolverOptions,
                     project_simplex, rmle, solve)
from .spline import refine, spline_fit

__version__ = "0.1.0"

__all__ = [
    "AlphaLadder", "DensityDump", "DensityEstimate", "EstimationReport",
    "Grid", "OperatorMatrix", "PenaltyKind", "SolverError", "SolverOptions",
    "build_operator", "cell_center", "cell_of_point", "cv_select",
    "dump_operator", "emit_plot_data", "expected_value", "halving_search",
    "lepskii", "load_operator", "make_grid", "marginal_2d", "maxval", "modes",
    "neg_avg_loglik", "objective", "penalty", "project_simplex", "read_csv",
    "read_dump", "refine", "rmle", "shift_estimate", "sim_sample", "solve",
    "spline_fit", "transmatrix", "write_csv", "write_dump",
]
