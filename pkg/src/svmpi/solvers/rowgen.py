"""Row generation for box LPs with many symmetric two-sided rows.

Solves

    min  c @ x   s.t.  a @ x = rhs,  lower <= x <= upper,  |M x| <= h  (row-wise)

by keeping only a working set of the ``|M x| <= h`` rows. After each solve the
remaining rows are priced with one matrix-vector product and the most violated
ones are appended. The HiGHS model is modified in place, so each re-solve is
warm-started from the previous basis. When the optimal working-set solution
violates no remaining row it is optimal for the full problem, and the omitted
rows take zero multipliers.
"""
from __future__ import annotations

from dataclasses import dataclass

import highspy
import numpy as np

from .base import ITERATION_LIMIT, OPTIMAL, INFEASIBLE, UNBOUNDED


@dataclass
class RowGenResult:
    x: np.ndarray
    row_duals: np.ndarray   # one per row of M; zero for rows never generated
    eq_dual: float
    status: str
    rounds: int
    iterations: int
    working_set: np.ndarray


_STATUS = {
    highspy.HighsModelStatus.kOptimal: OPTIMAL,
    highspy.HighsModelStatus.kInfeasible: INFEASIBLE,
    highspy.HighsModelStatus.kUnbounded: UNBOUNDED,
}


def solve_box_lp_rowgen(cost, eq_vector, eq_rhs: float, lower, upper, m_rows, h,
                        tol: float = 1e-9, batch: int = 10,
                        max_rounds: int | None = None) -> RowGenResult:
    cost = np.asarray(cost, dtype=float)
    a = np.asarray(eq_vector, dtype=float)
    M = np.asarray(m_rows, dtype=float)
    h = np.broadcast_to(np.asarray(h, dtype=float), (M.shape[0],))
    n = cost.size
    if max_rounds is None:
        max_rounds = M.shape[0] // max(batch, 1) + 2

    model = highspy.Highs()
    model.setOptionValue("output_flag", False)
    model.setOptionValue("threads", 1)
    ftol = float(np.clip(tol, 1e-10, 1e-7))
    model.setOptionValue("primal_feasibility_tolerance", ftol)
    model.setOptionValue("dual_feasibility_tolerance", ftol)
    model.addVars(n, np.asarray(lower, dtype=float), np.asarray(upper, dtype=float))
    cols = np.arange(n, dtype=np.int32)
    model.changeColsCost(n, cols, cost)
    model.addRow(float(eq_rhs), float(eq_rhs), n, cols, a)

    working: list[int] = []
    iterations = 0
    status = ITERATION_LIMIT
    x = np.zeros(n)
    for rounds in range(1, max_rounds + 1):
        model.run()
        iterations += int(model.getInfo().simplex_iteration_count)
        status = _STATUS.get(model.getModelStatus(), ITERATION_LIMIT)
        if status != OPTIMAL:
            break
        x = np.array(model.getSolution().col_value)
        excess = np.abs(M @ x) - h
        excess[working] = -np.inf
        violated = np.flatnonzero(excess > tol * (1.0 + h))
        if violated.size == 0:
            break
        add = violated[np.argsort(-excess[violated], kind="stable")[:batch]]
        k = add.size
        model.addRows(k, -h[add], h[add], k * n, np.arange(k, dtype=np.int32) * n,
                      np.tile(cols, k), M[add].ravel())
        working.extend(int(i) for i in add)
    else:
        status = ITERATION_LIMIT

    sol = model.getSolution()
    duals = np.asarray(sol.row_dual, dtype=float)
    row_duals = np.zeros(M.shape[0])
    if working and duals.size == len(working) + 1:
        row_duals[np.asarray(working)] = duals[1:]
    eq_dual = float(duals[0]) if duals.size else 0.0
    return RowGenResult(x, row_duals, eq_dual, status, rounds, iterations,
                        np.asarray(working, dtype=int))
