"""Minimal nonnegative solutions of M-matrix algebraic Riccati equations.

The equation is ``XCX - XD - AX + B = 0`` with ``K = [[D, -C], [-B, A]]`` an
M-matrix.  :func:`solve` returns the minimal nonnegative solution ``Phi`` of
the equation and ``Psi`` of its dual, together with convergence data and a
structural analysis.
"""

from .analysis import CaseLabel, analyze_solution, analyze_structure, classify_case
from .errors import MareError, NotMMatrix, NotRegular
from .generators import GenSpec, fixture, random_problem
from .mmatrix import categorize
from .problem import RiccatiProblem, Solution
from .solvers import METHODS, SolverOptions, solve, solve_minimal

__all__ = [
    "CaseLabel",
    "GenSpec",
    "METHODS",
    "MareError",
    "NotMMatrix",
    "NotRegular",
    "RiccatiProblem",
    "Solution",
    "SolverOptions",
    "analyze_solution",
    "analyze_structure",
    "categorize",
    "classify_case",
    "fixture",
    "random_problem",
    "solve",
    "solve_minimal",
]
