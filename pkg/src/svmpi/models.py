"""Kernel quantile and regression models.

Every fitter returns a :class:`FitReport` whose models are
:class:`KernelModel` instances, i.e. functions of the form

    f(x) = sum_i coefficients[i] * k(support_inputs[i], x) + bias
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .kernels import KernelSpec, gram_matrix
from .losses import TubeParams
from .solvers import (
    ITERATION_LIMIT, OPTIMAL, LpProblem, QpBoxEqProblem, SolverError, SolverSolution, lp_certificate,
    solve_linear_system, solve_lp, solve_qp_box_eq,
)
from .solvers.rowgen import solve_box_lp_rowgen

MODEL_FORMAT = "svmpi.kernel_model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class KernelModel:
    support_inputs: np.ndarray
    coefficients: np.ndarray
    bias: float
    kernel: KernelSpec

    def __post_init__(self):
        sx = np.asarray(self.support_inputs, dtype=float)
        if sx.ndim == 1:
            sx = sx[:, None]
        coef = np.asarray(self.coefficients, dtype=float).ravel()
        if sx.shape[0] != coef.size:
            raise ValueError(f"{coef.size} coefficients for {sx.shape[0]} support inputs")
        sx.setflags(write=False)
        coef.setflags(write=False)
        object.__setattr__(self, "support_inputs", sx)
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def n_features(self) -> int:
        return self.support_inputs.shape[1]

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(1, -1) if x.size == self.n_features else x[:, None]
        if x.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {x.shape[1]}")
        return gram_matrix(self.kernel, x, self.support_inputs) @ self.coefficients + self.bias

    def shifted(self, offset: float) -> "KernelModel":
        return KernelModel(self.support_inputs, self.coefficients, self.bias + offset, self.kernel)

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "kernel": {"family": self.kernel.family, "width": self.kernel.width},
            "bias": self.bias,
            "coefficients": self.coefficients.tolist(),
            "support_inputs": self.support_inputs.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelModel":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError("not a kernel model document")
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')}")
        k = d["kernel"]
        return cls(np.array(d["support_inputs"], dtype=float), np.array(d["coefficients"], dtype=float),
                   d["bias"], KernelSpec(k["family"], k["width"]))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def loads(cls, text: str) -> "KernelModel":
        return cls.from_dict(json.loads(text))


def predict(model: KernelModel, x):
    """Evaluate a model at one feature vector (returns float) or a matrix of rows."""
    x = np.asarray(x, dtype=float)
    out = model.predict(x)
    return float(out[0]) if x.ndim == 1 and x.size == model.n_features else out


def sparsity(model: KernelModel, eps: float | None = None) -> float:
    """Percentage of coefficients with magnitude at most ``eps``.

    The default threshold is relative: 1e-6 times the largest magnitude.
    """
    coef = np.abs(model.coefficients)
    if coef.size == 0:
        return 100.0
    if eps is None:
        eps = 1e-6 * coef.max()
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    return float(100.0 * np.mean(coef <= eps))


@dataclass
class FitReport:
    models: tuple
    solver_status: str
    train_seconds: float
    sparsity_pct: tuple
    objective_value: float
    certificate: object = None
    iterations: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def model(self) -> KernelModel:
        return self.models[0]


def _check_fit_args(data: Dataset, q=None, c=None):
    if len(data) < 2:
        raise ValueError("need at least two training points")
    if q is not None and not 0 < q < 1:
        raise ValueError(f"quantile level must lie in (0, 1), got {q}")
    if c is not None and not c > 0:
        raise ValueError(f"C must be positive, got {c}")


def pinball_bias(residuals: np.ndarray, q: float) -> float:
    """Offset b minimising sum pinball(q, residuals - b); smallest minimiser on ties."""
    cand = np.unique(residuals)
    diff = residuals[None, :] - cand[:, None]
    loss = np.where(diff >= 0, q * diff, (q - 1.0) * diff).sum(axis=1)
    return float(cand[int(np.argmin(loss))])


def fit_svqr(data: Dataset, q: float, c: float, kernel: KernelSpec, tol: float = 1e-6,
             max_iter: int | None = None, gram: np.ndarray | None = None) -> FitReport:
    """Support vector quantile regression through its dual QP.

    The dual is solved in u = alpha - beta, which carries the whole objective:
    minimise 0.5 u'Ku - u'y subject to sum(u) = 0, -C(1-q) <= u <= Cq.
    """
    _check_fit_args(data, q, c)
    t0 = time.perf_counter()
    x, y = data.inputs, data.targets
    m = y.size
    K = gram_matrix(kernel, x) if gram is None else gram
    hi, lo = c * q, -c * (1.0 - q)
    prob = QpBoxEqProblem(K, -y, np.ones(m), 0.0, np.full(m, lo), np.full(m, hi))
    sol = solve_qp_box_eq(prob, tol=tol, max_iter=max_iter)
    if sol.status != OPTIMAL:
        raise SolverError(f"SVQR dual QP ended with status {sol.status}", sol.status)
    u = sol.variables
    fitted = K @ u
    margin = 1e-7 * c
    interior = ((u > margin) & (u < hi - margin)) | ((u < -margin) & (u > lo + margin))
    if interior.any():
        bias = float(np.mean(y[interior] - fitted[interior]))
        bias_rule = "kkt"
    else:
        bias = pinball_bias(y - fitted, q)
        bias_rule = "pinball_fallback"
    model = KernelModel(x, u, bias, kernel)
    elapsed = time.perf_counter() - t0
    return FitReport(
        models=(model,), solver_status=sol.status, train_seconds=elapsed,
        sparsity_pct=(sparsity(model),), objective_value=sol.objective_value,
        certificate=sol.certificate, iterations=sol.iterations,
        extra={"alpha": np.maximum(u, 0.0), "beta": np.maximum(-u, 0.0), "bias_rule": bias_rule,
               "n_interior": int(interior.sum()), "fitted": fitted + bias},
    )


def ssvqr_lp(K: np.ndarray, y: np.ndarray, q: float, c: float) -> LpProblem:
    """LP over (r, p, b, xi, xi*) with u = r - p, 4m + 1 variables."""
    m = y.size
    eye = np.eye(m)
    zero = np.zeros((m, m))
    ones = np.ones((m, 1))
    #            r    p    b      xi    xi*
    a_ub = np.block([
        [-K, K, -ones, -eye, zero],   # y - f <= xi
        [K, -K, ones, zero, -eye],    # f - y <= xi*
    ])
    b_ub = np.concatenate([-y, y])
    cost = np.concatenate([np.full(2 * m, 0.5), [0.0], np.full(m, c * q), np.full(m, c * (1.0 - q))])
    bounds = np.column_stack([np.zeros(4 * m + 1), np.full(4 * m + 1, np.inf)])
    bounds[2 * m] = (-np.inf, np.inf)
    return LpProblem(cost, a_ub=a_ub, b_ub=b_ub, bounds=bounds)


def ssvqr_dual_lp(K: np.ndarray, y: np.ndarray, q: float, c: float) -> LpProblem:
    """The LP dual of :func:`ssvqr_lp` written as a minimisation,

        min -y @ lam  s.t.  sum(lam) = 0,  -C(1-q) <= lam <= Cq,  |K lam| <= 1/2.
    """
    m = y.size
    return LpProblem(-y, a_eq=np.ones((1, m)), b_eq=[0.0], a_ub=np.vstack([K, -K]),
                     b_ub=np.full(2 * m, 0.5),
                     bounds=np.column_stack([np.full(m, -c * (1.0 - q)), np.full(m, c * q)]))


def _ssvqr_primal_from_dual(K, y, lam, row_duals, eq_dual):
    """Map a dual solution back to the primal LP: u = r - p is minus the
    duals of the ``|K lam|`` rows, b is minus the dual of the equality row.
    Returns (primal LP vector, row duals of the primal LP)."""
    u = -row_duals
    b = -float(eq_dual)
    resid = y - K @ u - b
    v = np.concatenate([np.maximum(u, 0.0), np.maximum(-u, 0.0), [b],
                        np.maximum(resid, 0.0), np.maximum(-resid, 0.0)])
    y_ub = np.concatenate([-np.maximum(lam, 0.0), np.minimum(lam, 0.0)])
    return v, y_ub


def _ssvqr_rowgen(K: np.ndarray, y: np.ndarray, q: float, c: float, tol: float):
    """Solve the SSVQR dual LP by row generation.
    Returns (primal LP vector, row duals of the primal LP, result)."""
    m = y.size
    res = solve_box_lp_rowgen(-y, np.ones(m), 0.0, np.full(m, -c * (1.0 - q)), np.full(m, c * q),
                              K, 0.5, tol=tol * 0.1)
    v, y_ub = _ssvqr_primal_from_dual(K, y, res.x, res.row_duals, res.eq_dual)
    return v, y_ub, res


def _ssvqr_dual_simplex(K: np.ndarray, y: np.ndarray, q: float, c: float, tol: float,
                        max_iter: int | None):
    """Solve the full SSVQR dual LP with the package simplex.
    Returns (primal LP vector, row duals of the primal LP, dual solution)."""
    m = y.size
    if max_iter is None:
        max_iter = 200 * m + 1000
    dual = solve_lp(ssvqr_dual_lp(K, y, q, c), tol=tol * 0.1, max_iter=max_iter, method="simplex")
    if dual.status != OPTIMAL:
        return None, None, dual
    ub = dual.duals["ub"]
    v, y_ub = _ssvqr_primal_from_dual(K, y, dual.variables, ub[:m] - ub[m:], dual.duals["eq"][0])
    return v, y_ub, dual


def fit_ssvqr(data: Dataset, q: float, c: float, kernel: KernelSpec, tol: float = 1e-8,
              max_iter: int | None = None, method: str = "rowgen",
              gram: np.ndarray | None = None) -> FitReport:
    """Sparse SVQR: L1-regularised pinball loss as a linear program.

    ``method="rowgen"`` (default) solves the LP dual by row generation and
    certifies the recovered primal point on the full LP; should that
    certificate fail, the full primal LP is solved with HiGHS instead.
    ``"highs"`` solves the full primal LP directly. ``"simplex"`` solves the
    full dual LP with the package's own simplex and certifies the recovered
    primal point the same way; the primal LP's kernel columns are usually
    numerically rank deficient, which a textbook simplex does not survive.
    """
    _check_fit_args(data, q, c)
    t0 = time.perf_counter()
    x, y = data.inputs, data.targets
    m = y.size
    K = gram_matrix(kernel, x) if gram is None else gram
    lp = ssvqr_lp(K, y, q, c)
    sol = None
    if method in ("rowgen", "simplex"):
        if method == "rowgen":
            v, y_ub, res = _ssvqr_rowgen(K, y, q, c, tol)
        else:
            v, y_ub, res = _ssvqr_dual_simplex(K, y, q, c, tol, max_iter)
        if res.status == OPTIMAL:
            cert = lp_certificate(lp, v, np.zeros(0), y_ub)
            if cert.worst() <= tol:
                sol = SolverSolution(v, float(lp.objective @ v), OPTIMAL, cert, res.iterations,
                                     {"eq": np.zeros(0), "ub": y_ub})
        if sol is None and method == "rowgen":
            sol = solve_lp(lp, tol=tol, max_iter=max_iter, method="highs")
        elif sol is None:
            status = res.status if res.status != OPTIMAL else ITERATION_LIMIT
            raise SolverError(f"SSVQR LP ended with status {status}", status)
    elif method == "highs":
        sol = solve_lp(lp, tol=tol, max_iter=max_iter, method="highs")
    else:
        raise ValueError(f"unknown SSVQR method {method!r}")
    if sol.status != OPTIMAL:
        raise SolverError(f"SSVQR LP ended with status {sol.status}", sol.status)
    v = sol.variables
    r, p, b = v[:m], v[m:2 * m], float(v[2 * m])
    model = KernelModel(x, r - p, b, kernel)
    elapsed = time.perf_counter() - t0
    return FitReport(
        models=(model,), solver_status=sol.status, train_seconds=elapsed,
        sparsity_pct=(sparsity(model),), objective_value=sol.objective_value,
        certificate=sol.certificate, iterations=sol.iterations,
        extra={"r": r, "p": p, "xi": v[2 * m + 1:3 * m + 1], "xi_star": v[3 * m + 1:],
               "fitted": K @ (r - p) + b},
    )


def lssvr_system(K: np.ndarray, y: np.ndarray, c: float):
    m = y.size
    a = np.zeros((m + 1, m + 1))
    a[0, 1:] = 1.0
    a[1:, 0] = 1.0
    a[1:, 1:] = K + (2.0 / c) * np.eye(m)
    return a, np.concatenate([[0.0], y])


def fit_lssvr(data: Dataset, c: float, kernel: KernelSpec, tol: float = 1e-8,
              gram: np.ndarray | None = None) -> FitReport:
    """Least-squares SVR from the bordered (m+1) x (m+1) system."""
    _check_fit_args(data, None, c)
    t0 = time.perf_counter()
    x, y = data.inputs, data.targets
    K = gram_matrix(kernel, x) if gram is None else gram
    a, rhs = lssvr_system(K, y, c)
    sol = solve_linear_system(a, rhs, tol=tol)
    model = KernelModel(x, sol[1:], sol[0], kernel)
    elapsed = time.perf_counter() - t0
    resid = float(np.max(np.abs(a @ sol - rhs)))
    return FitReport(
        models=(model,), solver_status=OPTIMAL, train_seconds=elapsed,
        sparsity_pct=(sparsity(model),), objective_value=float("nan"),
        extra={"residual": resid, "fitted": K @ sol[1:] + sol[0]},
    )


# --- Tube loss ------------------------------------------------------------------

def tube_pieces(params: TubeParams, u_up: np.ndarray, u_lo: np.ndarray) -> np.ndarray:
    """Vectorised branch index (1-4) of the Tube loss.

    ``u_up = y - upper`` and ``u_lo = y - lower``; the ordered case has
    ``u_up <= u_lo``. Crossed pairs fall through the same inequalities.
    """
    mix = params.r * u_up + (1.0 - params.r) * u_lo
    return np.where(u_up > 0, 1, np.where(u_lo < 0, 4, np.where(mix >= 0, 2, 3)))


def tube_objective(params: TubeParams, K, y, a_up, a_lo, b_up, b_lo) -> float:
    upper = K @ a_up + b_up
    lower = K @ a_lo + b_lo
    u_up, u_lo = y - upper, y - lower
    al = params.alpha
    piece = tube_pieces(params, u_up, u_lo)
    loss = np.select([piece == 1, piece == 2, piece == 3, piece == 4],
                     [(1 - al) * u_up, -al * u_up, al * u_lo, -(1 - al) * u_lo])
    return float(0.5 * params.lam * (a_up @ a_up + a_lo @ a_lo) + loss.sum()
                 + params.delta * np.abs(upper - lower).sum())


def tube_subgradient(params: TubeParams, K, y, a_up, a_lo, b_up, b_lo):
    """Subgradient of the Tube objective w.r.t. (a_up, a_lo, b_up, b_lo)."""
    upper = K @ a_up + b_up
    lower = K @ a_lo + b_lo
    u_up, u_lo = y - upper, y - lower
    al = params.alpha
    piece = tube_pieces(params, u_up, u_lo)
    # derivatives of the loss w.r.t. the bound values
    d_up = np.select([piece == 1, piece == 2], [-(1 - al), al], 0.0)
    d_lo = np.select([piece == 3, piece == 4], [-al, (1 - al)], 0.0)
    s = np.sign(upper - lower) * params.delta
    d_up = d_up + s
    d_lo = d_lo - s
    return (params.lam * a_up + K.T @ d_up, params.lam * a_lo + K.T @ d_lo,
            float(d_up.sum()), float(d_lo.sum()))


def fit_tube(data: Dataset, params: TubeParams, kernel: KernelSpec, step: float | None = None,
             max_epochs: int = 500, seed: int = 0, init_scale: float = 0.0,
             gram: np.ndarray | None = None) -> FitReport:
    """Fit both interval bounds by subgradient descent on the Tube objective.

    Biases start at the empirical (1 - alpha/2) and alpha/2 quantiles of y;
    coefficients start at zero, or at N(0, init_scale^2) draws from ``seed``.
    The step at epoch k is ``step / sqrt(k)``, halved until the objective
    does not increase (a step that never succeeds leaves the iterate put),
    so the recorded objective trace is non-increasing.
    """
    _check_fit_args(data)
    t0 = time.perf_counter()
    x, y = data.inputs, data.targets
    m = y.size
    K = gram_matrix(kernel, x) if gram is None else gram
    al = params.alpha
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    a_up = rng.normal(0.0, init_scale, m) if init_scale > 0 else np.zeros(m)
    a_lo = rng.normal(0.0, init_scale, m) if init_scale > 0 else np.zeros(m)
    b_up = float(np.quantile(y, 1.0 - al / 2.0))
    b_lo = float(np.quantile(y, al / 2.0))
    if step is None:
        step = 1.0 / (m * max(1.0, float(np.abs(K).max())))
    obj = tube_objective(params, K, y, a_up, a_lo, b_up, b_lo)
    trace = [obj]
    for epoch in range(1, max_epochs + 1):
        g = tube_subgradient(params, K, y, a_up, a_lo, b_up, b_lo)
        eta = step / np.sqrt(epoch)
        for _ in range(30):
            cand = (a_up - eta * g[0], a_lo - eta * g[1], b_up - eta * g[2], b_lo - eta * g[3])
            new = tube_objective(params, K, y, *cand)
            if not np.isfinite(new):
                raise FloatingPointError(f"non-finite Tube objective at epoch {epoch} (step {eta:.3e})")
            if new <= obj:
                a_up, a_lo, b_up, b_lo = cand
                obj = new
                break
            eta *= 0.5
        trace.append(obj)
    lower = KernelModel(x, a_lo, b_lo, kernel)
    upper = KernelModel(x, a_up, b_up, kernel)
    elapsed = time.perf_counter() - t0
    return FitReport(
        models=(lower, upper), solver_status=OPTIMAL, train_seconds=elapsed,
        sparsity_pct=(sparsity(lower), sparsity(upper)), objective_value=obj,
        iterations=max_epochs,
        extra={"trace": np.array(trace), "seed": int(seed), "init_scale": float(init_scale),
               "init_bias": (float(np.quantile(y, al / 2.0)), float(np.quantile(y, 1.0 - al / 2.0))),
               "step": float(step)},
    )
