"""Linear programs in general form.

    minimise    c @ x
    subject to  a_eq @ x == b_eq
                a_ub @ x <= b_ub
                lower <= x <= upper      (infinite bounds allowed)

Two back-ends share one certificate: ``"highs"`` (scipy's HiGHS dual simplex)
and ``"simplex"``, a two-phase revised simplex using Bland's lowest-index
entering rule with a fresh LU factorisation of the basis at every pivot.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve
from scipy.optimize import linprog

from .base import INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED, Certificate, SolverSolution


def _matrix(a, n):
    if a is None:
        return np.zeros((0, n))
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    return a


@dataclass
class LpProblem:
    objective: np.ndarray
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    a_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    bounds: np.ndarray | None = None  # shape (n, 2); default [0, inf)

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).ravel()
        n = self.objective.size
        self.a_eq = _matrix(self.a_eq, n)
        self.a_ub = _matrix(self.a_ub, n)
        self.b_eq = np.zeros(0) if self.b_eq is None else np.asarray(self.b_eq, dtype=float).ravel()
        self.b_ub = np.zeros(0) if self.b_ub is None else np.asarray(self.b_ub, dtype=float).ravel()
        if self.bounds is None:
            self.bounds = np.column_stack([np.zeros(n), np.full(n, np.inf)])
        self.bounds = np.asarray(self.bounds, dtype=float).reshape(n, 2)
        for name, a, b in (("eq", self.a_eq, self.b_eq), ("ub", self.a_ub, self.b_ub)):
            if a.shape[1] != n:
                raise ValueError(f"{name} constraint matrix has {a.shape[1]} columns, expected {n}")
            if a.shape[0] != b.size:
                raise ValueError(f"{name} constraint matrix has {a.shape[0]} rows but rhs has {b.size}")
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        if np.any(lo > hi) or np.any(lo == np.inf) or np.any(hi == -np.inf):
            raise ValueError("inconsistent variable bounds")

    @property
    def n(self) -> int:
        return self.objective.size


def lp_certificate(p: LpProblem, x, y_eq, y_ub) -> Certificate:
    """Scaled KKT residuals of ``x`` with row multipliers ``y_eq``, ``y_ub``.

    Multipliers follow the convention ``c - A^T y = d`` (reduced costs), so
    ``y_ub <= 0`` for a minimisation with ``<=`` rows.
    """
    x = np.asarray(x, dtype=float)
    lo, hi = p.bounds[:, 0], p.bounds[:, 1]
    finite_data = [np.abs(p.b_eq), np.abs(p.b_ub), np.abs(lo[np.isfinite(lo)]), np.abs(hi[np.isfinite(hi)])]
    bscale = 1.0 + max((v.max() for v in finite_data if v.size), default=0.0)
    cscale = 1.0 + np.max(np.abs(p.objective), initial=0.0)
    xscale = 1.0 + np.max(np.abs(x), initial=0.0)

    r_eq = p.a_eq @ x - p.b_eq
    slack_ub = p.b_ub - p.a_ub @ x
    primal = max(
        np.max(np.abs(r_eq), initial=0.0),
        np.max(-slack_ub, initial=0.0),
        np.max(lo - x, initial=0.0),
        np.max(x - hi, initial=0.0),
    ) / bscale

    d = p.objective - p.a_eq.T @ y_eq - p.a_ub.T @ y_ub
    has_lo, has_hi = np.isfinite(lo), np.isfinite(hi)
    # a positive reduced cost needs a lower bound to rest on, a negative one an upper bound
    dual_viol = np.where(has_lo, 0.0, np.maximum(d, 0.0)) + np.where(has_hi, 0.0, np.maximum(-d, 0.0))
    dual = max(np.max(dual_viol, initial=0.0), np.max(y_ub, initial=0.0)) / cscale

    gap_lo = np.where(has_lo, x - np.where(has_lo, lo, 0.0), 0.0)
    gap_hi = np.where(has_hi, np.where(has_hi, hi, 0.0) - x, 0.0)
    comp_var = np.where(d > 0, d * gap_lo, -d * gap_hi)
    comp_row = np.abs(y_ub * slack_ub)
    comp = max(np.max(np.abs(comp_var), initial=0.0), np.max(comp_row, initial=0.0)) / (cscale * xscale)
    return Certificate(primal=float(primal), dual=float(dual), complementarity=float(comp))


def solve_lp(p: LpProblem, tol: float = 1e-8, max_iter: int | None = None,
             method: str = "highs") -> SolverSolution:
    if max_iter is None:
        max_iter = 50 * max(p.n, 1)
    if method == "highs":
        return _solve_highs(p, tol, max_iter)
    if method == "simplex":
        return _solve_simplex(p, tol, max_iter)
    raise ValueError(f"unknown LP method {method!r}")


def _finish(p, x, y_eq, y_ub, status, iters, tol):
    x = np.asarray(x, dtype=float)
    cert = lp_certificate(p, x, y_eq, y_ub)
    if status == OPTIMAL and cert.worst() > tol:
        status = ITERATION_LIMIT
    return SolverSolution(
        variables=x, objective_value=float(p.objective @ x), status=status,
        certificate=cert, iterations=iters, duals={"eq": y_eq, "ub": y_ub},
    )


def _highs_once(p: LpProblem, tol: float, max_iter: int, method: str) -> SolverSolution:
    ftol = float(np.clip(tol * 0.1, 1e-10, 1e-7))
    res = linprog(
        p.objective,
        A_ub=p.a_ub if p.a_ub.shape[0] else None, b_ub=p.b_ub if p.b_ub.size else None,
        A_eq=p.a_eq if p.a_eq.shape[0] else None, b_eq=p.b_eq if p.b_eq.size else None,
        bounds=[(None if not np.isfinite(lo) else lo, None if not np.isfinite(hi) else hi)
                for lo, hi in p.bounds],
        method=method,
        options={"primal_feasibility_tolerance": ftol, "dual_feasibility_tolerance": ftol,
                 "maxiter": int(max_iter), "presolve": True},
    )
    status = {0: OPTIMAL, 1: ITERATION_LIMIT, 2: INFEASIBLE, 3: UNBOUNDED}.get(res.status, ITERATION_LIMIT)
    iters = int(getattr(res, "nit", 0) or 0)
    if res.x is None:
        return SolverSolution(variables=np.full(p.n, np.nan), objective_value=np.nan,
                              status=status, iterations=iters)
    y_eq = np.asarray(res.eqlin.marginals) if p.a_eq.shape[0] else np.zeros(0)
    y_ub = np.asarray(res.ineqlin.marginals) if p.a_ub.shape[0] else np.zeros(0)
    return _finish(p, res.x, y_eq, y_ub, status, iters, tol)


def _solve_highs(p: LpProblem, tol: float, max_iter: int) -> SolverSolution:
    sol = _highs_once(p, tol, max_iter, "highs-ds")
    if sol.status == ITERATION_LIMIT and sol.certificate is not None:
        # HiGHS judges optimality on its internally scaled model; when our
        # unscaled certificate disagrees, the interior-point path with
        # crossover usually returns cleaner multipliers.
        retry = _highs_once(p, tol, max_iter, "highs-ipm")
        if retry.certificate is not None and retry.certificate.worst() < sol.certificate.worst():
            retry.iterations += sol.iterations
            sol = retry
    return sol


# --- revised simplex -------------------------------------------------------

def _standard_form(p: LpProblem):
    """Rewrite as min c_s @ z, A_s z = b_s, z >= 0.

    Returns the standard-form data plus a recipe mapping z back to x.
    """
    n = p.n
    lo, hi = p.bounds[:, 0], p.bounds[:, 1]
    cols = []      # (original var, sign) per structural column
    shift = np.zeros(n)
    bound_rows = []  # (column index, upper - lower) for doubly bounded vars
    for j in range(n):
        if np.isfinite(lo[j]):
            shift[j] = lo[j]
            cols.append((j, 1.0))
            if np.isfinite(hi[j]):
                bound_rows.append((len(cols) - 1, hi[j] - lo[j]))
        elif np.isfinite(hi[j]):
            shift[j] = hi[j]
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    ns = len(cols)
    n_eq, n_ub, n_bd = p.a_eq.shape[0], p.a_ub.shape[0], len(bound_rows)
    n_slack = n_ub + n_bd
    rows = n_eq + n_ub + n_bd
    a = np.zeros((rows, ns + n_slack))
    b = np.zeros(rows)
    c = np.zeros(ns + n_slack)
    for k, (j, s) in enumerate(cols):
        a[:n_eq, k] = s * p.a_eq[:, j]
        a[n_eq:n_eq + n_ub, k] = s * p.a_ub[:, j]
        c[k] = s * p.objective[j]
    b[:n_eq] = p.b_eq - p.a_eq @ shift
    b[n_eq:n_eq + n_ub] = p.b_ub - p.a_ub @ shift
    for i in range(n_ub):
        a[n_eq + i, ns + i] = 1.0
    for i, (k, width) in enumerate(bound_rows):
        a[n_eq + n_ub + i, k] = 1.0
        a[n_eq + n_ub + i, ns + n_ub + i] = 1.0
        b[n_eq + n_ub + i] = width
    return a, b, c, cols, shift, (n_eq, n_ub)


_PIVOT_TOL = 1e-9
_STALL_LIMIT = 30


def _bland_phase(a, b, c, basis, allowed, max_iter, it, eps):
    """Revised simplex pivots on ``min c z, a z = b, z >= 0`` from a feasible
    ``basis``; ``allowed`` masks the columns that may enter.

    The entering column is the lowest-index one with a negative reduced cost
    (Bland). Leaving rows come from a Harris two-pass ratio test, preferring
    the largest pivot and then the lowest basic index.
    Returns (status, iterations, basic values).
    """
    best_objective, stall = np.inf, 0
    while True:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LinAlgWarning)
            lu = lu_factor(a[:, basis])
        xb = lu_solve(lu, b)
        if not np.all(np.isfinite(xb)):
            # the basis became numerically singular; report no verdict
            return ITERATION_LIMIT, it, np.zeros_like(xb)
        if it >= max_iter:
            return ITERATION_LIMIT, it, xb
        y = lu_solve(lu, c[basis], trans=1)
        reduced = c - a.T @ y
        scale = 1.0 + np.max(np.abs(c[allowed]), initial=0.0)
        reduced[basis] = 0.0  # exact in theory; only round-off otherwise
        candidates = np.flatnonzero(allowed & (reduced < -eps * scale))
        if candidates.size == 0:
            return OPTIMAL, it, xb
        k = d = None
        for j in candidates:
            dj = lu_solve(lu, a[:, j])
            size = 1.0 + np.max(np.abs(a[:, j]), initial=0.0)
            pos = dj > _PIVOT_TOL * size
            if np.any(pos):
                k, d = int(j), dj
                break
            # no usable pivot. A genuine ray has no positive entry at all and
            # also descends when its cost is evaluated directly; anything else
            # is round-off on an ill-conditioned basis and the column is skipped
            if np.all(dj <= eps * size) and c[j] - c[basis] @ dj < -eps * scale:
                return UNBOUNDED, it, xb
        if k is None:
            return OPTIMAL, it, xb
        rhs = np.maximum(xb, 0.0)
        rows = np.flatnonzero(pos)
        ratios = rhs[rows] / d[rows]
        objective = float(c[basis] @ xb)
        if objective < best_objective - eps * scale * (1.0 + abs(objective)):
            best_objective, stall = objective, 0
        else:
            stall += 1
        if stall < _STALL_LIMIT:
            # Harris two-pass: relax the step by a feasibility tolerance and
            # take the largest pivot among the rows it admits
            feas = eps * (1.0 + np.max(np.abs(xb), initial=0.0))
            ties = rows[ratios <= np.min((rhs[rows] + feas) / d[rows])]
            big = np.max(d[ties])
            ties = ties[d[ties] >= big * (1.0 - 1e-12)]
        else:
            # stalled on degenerate pivots: strict Bland leaving rule, which
            # cannot cycle
            ties = rows[ratios <= ratios.min() * (1.0 + 1e-12)]
        r = int(min(ties, key=lambda i: basis[i]))
        basis[r] = k
        it += 1


def _solve_simplex(p: LpProblem, tol: float, max_iter: int) -> SolverSolution:
    a, b, c, cols, shift, (n_eq, n_ub) = _standard_form(p)
    rows, nz = a.shape
    sign = np.where(b < 0, -1.0, 1.0)
    a = a * sign[:, None]
    b = b * sign
    eps = 1e-10

    if rows == 0:
        # only sign constraints: optimal at zero unless some cost is negative
        if np.any(c < 0):
            return SolverSolution(variables=np.full(p.n, np.nan), objective_value=-np.inf,
                                  status=UNBOUNDED, iterations=0)
        x = _recover(np.zeros(0), [], nz, cols, shift, p.n)
        return _finish(p, x, np.zeros(0), np.zeros(0), OPTIMAL, 0, tol)

    # phase one: artificial identity columns, minimise their sum
    a1 = np.hstack([a, np.eye(rows)])
    c1 = np.concatenate([np.zeros(nz), np.ones(rows)])
    basis = list(range(nz, nz + rows))
    allowed = np.zeros(nz + rows, dtype=bool)
    allowed[:nz] = True
    status, it, xb = _bland_phase(a1, b, c1, basis, allowed, max_iter, 0, eps)
    if status == ITERATION_LIMIT:
        x = _recover(xb, basis, nz, cols, shift, p.n)
        return _finish(p, x, np.zeros(n_eq), np.zeros(n_ub), ITERATION_LIMIT, it, tol)
    if c1[basis] @ xb > 1e-9 * (1.0 + np.max(np.abs(b), initial=0.0)):
        return SolverSolution(variables=np.full(p.n, np.nan), objective_value=np.nan,
                              status=INFEASIBLE, iterations=it)

    # drive zero-level artificials out of the basis; drop redundant rows
    keep = np.ones(rows, dtype=bool)
    for r in range(rows):
        if basis[r] < nz:
            continue
        row = np.linalg.solve(a1[:, basis].T, np.eye(rows)[r]) @ a
        row[[bv for bv in basis if bv < nz]] = 0.0
        nonzero = np.flatnonzero(np.abs(row) > 1e-9 * (1.0 + np.max(np.abs(row))))
        if nonzero.size:
            basis[r] = int(nonzero[0])
        else:
            keep[r] = False
    basis = [bv for bv, k in zip(basis, keep) if k]
    a2, b2 = a[keep], b[keep]

    status, it, xb = _bland_phase(a2, b2, c, basis, np.ones(nz, dtype=bool), max_iter, it, eps)
    x = _recover(xb, basis, nz, cols, shift, p.n)
    if status == UNBOUNDED:
        return SolverSolution(variables=x, objective_value=-np.inf, status=UNBOUNDED, iterations=it)
    y = np.zeros(rows)
    y[keep] = lu_solve(lu_factor(a2[:, basis]), c[basis], trans=1)
    y = y * sign
    return _finish(p, x, y[:n_eq], y[n_eq:n_eq + n_ub], status, it, tol)


def _recover(xb, basis, nz, cols, shift, n):
    z = np.zeros(nz)
    for v, bv in zip(xb, basis):
        if bv < nz:
            z[bv] = v
    x = shift.copy()
    for k, (j, s) in enumerate(cols):
        x[j] += s * z[k]
    return x
