"""Convex QP with box bounds and one linear equality.

    minimise    0.5 * x @ G @ x + c @ x
    subject to  a @ x == rhs,   lower <= x <= upper

Solved by pairwise (SMO-style) decomposition with second-order working-set
selection. Variables with a zero equality coefficient are updated one at a
time. The working-set rule is deterministic (lowest index on ties).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED, Certificate, SolverSolution

_TAU = 1e-12


@dataclass
class QpBoxEqProblem:
    gram: np.ndarray
    linear: np.ndarray
    eq_vector: np.ndarray
    eq_rhs: float
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.gram = np.asarray(self.gram, dtype=float)
        n = self.gram.shape[0]
        if self.gram.shape != (n, n):
            raise ValueError(f"gram must be square, got {self.gram.shape}")
        if not np.allclose(self.gram, self.gram.T, rtol=0.0, atol=1e-10 * (1.0 + np.abs(self.gram).max(initial=0.0))):
            raise ValueError("gram matrix is not symmetric")
        self.linear = np.broadcast_to(np.asarray(self.linear, dtype=float), (n,)).copy()
        self.eq_vector = np.broadcast_to(np.asarray(self.eq_vector, dtype=float), (n,)).copy()
        self.lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy()
        self.upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy()
        self.eq_rhs = float(self.eq_rhs)
        if np.any(self.lower > self.upper):
            raise ValueError("inconsistent variable bounds")

    @property
    def n(self) -> int:
        return self.gram.shape[0]

    def objective(self, x) -> float:
        return float(0.5 * x @ self.gram @ x + self.linear @ x)


def _initial_point(p: QpBoxEqProblem):
    """Feasible start: x(t) = clip(t * a, lower, upper) with a @ x(t) == rhs.

    ``a @ x(t)`` is nondecreasing in t, so bisection finds the root.
    """
    a = p.eq_vector

    def x_of(t):
        return np.clip(t * a, p.lower, p.upper)

    def h(t):
        return float(a @ x_of(t)) - p.eq_rhs

    tol = 1e-13 * (1.0 + abs(p.eq_rhs))
    if abs(h(0.0)) <= tol:
        return x_of(0.0)
    lo, hi = (0.0, 1.0) if h(0.0) < 0 else (-1.0, 0.0)
    for _ in range(200):
        if (h(hi) >= 0) and (h(lo) <= 0):
            break
        lo, hi = (lo, hi * 2.0) if h(0.0) < 0 else (lo * 2.0, hi)
    else:
        return None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if h(mid) < 0:
            lo = mid
        else:
            hi = mid
    x = x_of(hi)
    # absorb the leftover residual in any variable with slack
    r = p.eq_rhs - a @ x
    for i in np.flatnonzero(a != 0):
        step = np.clip(x[i] + r / a[i], p.lower[i], p.upper[i]) - x[i]
        x[i] += step
        r -= a[i] * step
        if r == 0:
            break
    return x


def _violation(x, g, lo, hi, a):
    """Maximal KKT violation for the equality-coupled and free variables.

    Works in scaled coordinates z = a * x, where the equality reads sum z.
    Returns (gap, i_up, j_low, k_single, single_gap).
    """
    coup = a != 0
    gz = np.where(coup, g / np.where(coup, a, 1.0), 0.0)
    # directions that increase / decrease z_i while staying feasible
    can_up = coup & np.where(a > 0, x < hi, x > lo)
    can_dn = coup & np.where(a > 0, x > lo, x < hi)
    gap = 0.0
    i = j = -1
    if can_up.any() and can_dn.any():
        up_vals = np.where(can_up, gz, np.inf)
        dn_vals = np.where(can_dn, gz, -np.inf)
        i = int(np.argmin(up_vals))
        gap = float(dn_vals.max() - up_vals[i])
        j = int(np.argmax(dn_vals))
    # uncoupled variables: projected gradient
    free = ~coup
    k = -1
    sgap = 0.0
    if free.any():
        pg = np.where(free & (((g < 0) & (x < hi)) | ((g > 0) & (x > lo))), np.abs(g), 0.0)
        k = int(np.argmax(pg))
        sgap = float(pg[k])
    return max(gap, 0.0), i, j, k, sgap


def qp_certificate(p: QpBoxEqProblem, x) -> tuple[Certificate, float]:
    """KKT residuals of ``x`` and the implied equality multiplier."""
    x = np.asarray(x, dtype=float)
    a = p.eq_vector
    g = p.gram @ x + p.linear
    scale = 1.0 + np.max(np.abs(p.linear), initial=0.0)
    primal = max(abs(float(a @ x) - p.eq_rhs),
                 np.max(p.lower - x, initial=0.0), np.max(x - p.upper, initial=0.0))
    gap, i, j, _, sgap = _violation(x, g, p.lower, p.upper, a)
    coup = a != 0
    lam = 0.0
    if i >= 0 and j >= 0:
        up = coup & np.where(a > 0, x < p.upper, x > p.lower)
        dn = coup & np.where(a > 0, x > p.lower, x < p.upper)
        lam = 0.5 * (np.min(np.where(up, g / np.where(coup, a, 1.0), np.inf))
                     + np.max(np.where(dn, g / np.where(coup, a, 1.0), -np.inf)))
    elif coup.any():
        lam = float(np.median(g[coup] / a[coup]))
    reduced = g - lam * a
    proj = np.clip(x - reduced, p.lower, p.upper)
    comp = float(np.max(np.abs(x - proj), initial=0.0))
    cert = Certificate(primal=float(primal), dual=max(gap, sgap) / scale, complementarity=comp / scale)
    return cert, float(lam)


def solve_qp_box_eq(p: QpBoxEqProblem, tol: float = 1e-6, max_iter: int | None = None,
                    x0=None) -> SolverSolution:
    n = p.n
    if max_iter is None:
        max_iter = max(10 * n * n, 1000)
    lo, hi, a = p.lower, p.upper, p.eq_vector
    x = _initial_point(p) if x0 is None else np.asarray(x0, dtype=float).copy()
    if x is None:
        return SolverSolution(variables=np.full(n, np.nan), objective_value=np.nan, status=INFEASIBLE)
    G = p.gram
    diag = np.diag(G).copy()
    g = G @ x + p.linear
    scale = 1.0 + np.max(np.abs(p.linear), initial=0.0)
    coup = a != 0
    safe_a = np.where(coup, a, 1.0)
    # the gap lives in z = a * x units; a free variable's reduced gradient is
    # |a_i| * gap / 2 in x units, so tighten the stop to keep the certificate
    stop = tol * scale / max(1.0, float(np.max(np.abs(a), initial=0.0)))
    status = ITERATION_LIMIT
    it = 0
    while it < max_iter:
        gap, i, j, k, sgap = _violation(x, g, lo, hi, a)
        if max(gap, sgap) <= stop:
            fresh = G @ x + p.linear
            if np.array_equal(fresh, g):
                status = OPTIMAL
                break
            # running gradient drifted; recheck with the exact one
            g = fresh
            continue
        if gap >= sgap:
            # second-order choice of j given i (scaled coordinates)
            gz = g / safe_a
            dn = coup & np.where(a > 0, x > lo, x < hi)
            diff = gz - gz[i]
            cand = dn & (diff > 0)
            curv = (diag[i] / a[i] ** 2 + diag / safe_a ** 2 - 2.0 * G[i] / (a[i] * safe_a))
            curv = np.where(curv > _TAU, curv, _TAU)
            score = np.where(cand, diff * diff / curv, -np.inf)
            j = int(np.argmax(score))
            # move z_i up by t, z_j down by t
            t_newton = diff[j] / curv[j]
            room_i = (hi[i] - x[i]) * a[i] if a[i] > 0 else (lo[i] - x[i]) * a[i]
            room_j = (x[j] - lo[j]) * a[j] if a[j] > 0 else (x[j] - hi[j]) * a[j]
            t = min(t_newton, room_i, room_j)
            if not np.isfinite(t):
                status = UNBOUNDED
                break
            dxi, dxj = t / a[i], -t / a[j]
            x[i] += dxi
            x[j] += dxj
            g += G[:, i] * dxi + G[:, j] * dxj
            # snap onto bounds hit by the clipped step
            if t == room_i:
                x[i] = hi[i] if a[i] > 0 else lo[i]
            if t == room_j:
                x[j] = lo[j] if a[j] > 0 else hi[j]
        else:
            if diag[k] > _TAU:
                target = x[k] - g[k] / diag[k]
            else:
                target = hi[k] if g[k] < 0 else lo[k]
            new = float(np.clip(target, lo[k], hi[k]))
            if not np.isfinite(new):
                status = UNBOUNDED
                break
            dx = new - x[k]
            x[k] = new
            g += G[:, k] * dx
        it += 1
    cert, lam = qp_certificate(p, x)
    if status == OPTIMAL and cert.worst() > tol:
        status = ITERATION_LIMIT
    return SolverSolution(variables=x, objective_value=p.objective(x), status=status,
                          certificate=cert, iterations=it, duals={"eq": lam})
