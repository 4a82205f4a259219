"""Optimisation back-ends with optimality certificates."""
from .base import (
    INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED, Certificate, SolverError, SolverSolution,
)
from .linsys import SingularSystemError, solve_linear_system
from .lp import LpProblem, lp_certificate, solve_lp
from .qp import QpBoxEqProblem, qp_certificate, solve_qp_box_eq

__all__ = [
    "OPTIMAL", "INFEASIBLE", "UNBOUNDED", "ITERATION_LIMIT",
    "Certificate", "SolverSolution", "SolverError",
    "LpProblem", "solve_lp", "lp_certificate",
    "QpBoxEqProblem", "solve_qp_box_eq", "qp_certificate",
    "solve_linear_system", "SingularSystemError",
]
