"""Prediction intervals from pairs of kernel quantile models, plus tuning."""
from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from . import metrics
from .data import Dataset, atomic_write
from .kernels import KernelSpec, gram_matrix
from .losses import TubeParams
from .models import KernelModel, fit_lssvr, fit_ssvqr, fit_svqr, fit_tube

METHODS = ("svqr", "ssvqr", "lssvr", "tube")
DEFAULT_POWERS = tuple(2.0 ** k for k in range(-8, 9))
DEFAULT_QBAR_GRID = (0.005, 0.01, 0.015, 0.02, 0.025, 0.03, 0.035, 0.04, 0.045)
INTERVAL_FORMAT = "svmpi.prediction_interval"


@dataclass
class PredictionInterval:
    lower: KernelModel
    upper: KernelModel
    coverage_target: float
    q_bar: float
    conformal_offset: float = 0.0
    method: str = "svqr"
    fits: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if self.lower.kernel.family != self.upper.kernel.family:
            raise ValueError("lower and upper models use different kernel families")

    @property
    def levels(self) -> tuple[float, float]:
        return self.q_bar, self.q_bar + self.coverage_target

    def raw_bounds(self, x):
        return self.lower.predict(x), self.upper.predict(x)

    def bounds(self, x):
        """Reported interval: crossing repaired pointwise, then widened by the offset."""
        lo, hi = metrics.repair_crossing(*self.raw_bounds(x))
        lo, hi = lo - self.conformal_offset, hi + self.conformal_offset
        if self.conformal_offset < 0:
            lo, hi = metrics.repair_crossing(lo, hi)
        return lo, hi

    def evaluate(self, data: Dataset, truth=None) -> metrics.ExperimentReport:
        lo, hi = self.bounds(data.inputs)
        sp = tuple(f.sparsity_pct[0] for f in self.fits)
        if len(sp) != 2:
            sp = (0.0, 0.0)
        tt = sum(f.train_seconds for f in self.fits)
        tl, tu = (None, None) if truth is None else truth
        report = metrics.evaluate_interval(lo, hi, data.targets, self.coverage_target,
                                           truth_lower=tl, truth_upper=tu, sparsity=sp,
                                           train_seconds=tt)
        report.crossing_fraction = metrics.crossing_fraction(*self.raw_bounds(data.inputs))
        return report

    def header(self) -> dict:
        return {"format": INTERVAL_FORMAT, "version": 1, "method": self.method,
                "coverage_target": self.coverage_target, "q_bar": self.q_bar,
                "conformal_offset": self.conformal_offset}

    def save(self, stem) -> list[str]:
        """Write ``<stem>.lower.json``, ``<stem>.upper.json`` and ``<stem>.json``."""
        stem = os.fspath(stem)
        paths = [f"{stem}.lower.json", f"{stem}.upper.json", f"{stem}.json"]
        atomic_write(paths[0], self.lower.dumps())
        atomic_write(paths[1], self.upper.dumps())
        head = self.header()
        head["lower"] = os.path.basename(paths[0])
        head["upper"] = os.path.basename(paths[1])
        atomic_write(paths[2], json.dumps(head, indent=1))
        return paths

    @classmethod
    def load(cls, stem) -> "PredictionInterval":
        stem = os.fspath(stem)
        with open(f"{stem}.json", encoding="utf-8") as fh:
            head = json.load(fh)
        if head.get("format") != INTERVAL_FORMAT:
            raise ValueError("not a prediction interval header")
        base = os.path.dirname(stem)
        with open(os.path.join(base, head["lower"]), encoding="utf-8") as fh:
            lower = KernelModel.loads(fh.read())
        with open(os.path.join(base, head["upper"]), encoding="utf-8") as fh:
            upper = KernelModel.loads(fh.read())
        return cls(lower, upper, head["coverage_target"], head["q_bar"],
                   head["conformal_offset"], head["method"])


def check_levels(coverage_target: float, q_bar: float) -> None:
    if not 0 < coverage_target < 1:
        raise ValueError(f"coverage_target must lie in (0, 1), got {coverage_target}")
    if not 0 <= q_bar <= 1 - coverage_target + 1e-12:
        raise ValueError(f"q_bar must lie in [0, {1 - coverage_target:g}], got {q_bar}")


def quantile_levels(coverage_target: float, q_bar: float) -> tuple[float, float]:
    check_levels(coverage_target, q_bar)
    lo, hi = q_bar, q_bar + coverage_target
    if not (0 < lo < 1 and 0 < hi < 1):
        raise ValueError(f"quantile levels ({lo}, {hi}) must lie strictly inside (0, 1)")
    return lo, hi


def _pi_quantile(fitter, data, coverage_target, q_bar, c, kernel, method, gram=None, **kw):
    lo_q, hi_q = quantile_levels(coverage_target, q_bar)
    if gram is None:
        gram = gram_matrix(kernel, data.inputs)
    f_lo = fitter(data, lo_q, c, kernel, gram=gram, **kw)
    f_hi = fitter(data, hi_q, c, kernel, gram=gram, **kw)
    return PredictionInterval(f_lo.model, f_hi.model, coverage_target, q_bar, method=method,
                              fits=(f_lo, f_hi))


def pi_svqr(data: Dataset, coverage_target: float, q_bar: float, c: float, kernel: KernelSpec,
            **kw) -> PredictionInterval:
    """Quantile pair (q_bar, q_bar + coverage) from two SVQR fits."""
    return _pi_quantile(fit_svqr, data, coverage_target, q_bar, c, kernel, "svqr", **kw)


def pi_ssvqr(data: Dataset, coverage_target: float, q_bar: float, c: float, kernel: KernelSpec,
             **kw) -> PredictionInterval:
    """Quantile pair (q_bar, q_bar + coverage) from two sparse SVQR fits."""
    return _pi_quantile(fit_ssvqr, data, coverage_target, q_bar, c, kernel, "ssvqr", **kw)


def pi_lssvr(data: Dataset, coverage_target: float, c: float, kernel: KernelSpec,
             gram=None) -> PredictionInterval:
    """LS-SVR mean plus normal quantiles of the training residuals."""
    if not 0 < coverage_target < 1:
        raise ValueError(f"coverage_target must lie in (0, 1), got {coverage_target}")
    fit = fit_lssvr(data, c, kernel, gram=gram)
    resid = data.targets - fit.extra["fitted"]
    sigma = float(np.std(resid, ddof=1))
    a = 1.0 - coverage_target
    z = float(stats.norm.ppf(1.0 - a / 2.0))
    mean = fit.model
    # the two shifts are exact negatives of each other
    lower, upper = mean.shifted(-z * sigma), mean.shifted(z * sigma)
    lower_fit = replace(fit, models=(lower,), extra={**fit.extra, "sigma": sigma})
    upper_fit = replace(fit, models=(upper,), extra={**fit.extra, "sigma": sigma}, train_seconds=0.0)
    return PredictionInterval(lower, upper, coverage_target, a / 2.0, method="lssvr",
                              fits=(lower_fit, upper_fit))


def pi_tube(data: Dataset, coverage_target: float, c: float, kernel: KernelSpec, r: float = 0.5,
            delta: float = 0.0, gram=None, **kw) -> PredictionInterval:
    """Tube-loss interval; ``c`` enters as the ridge weight lam = 1 / c."""
    params = TubeParams(coverage_target=coverage_target, r=r, delta=delta, lam=1.0 / c)
    fit = fit_tube(data, params, kernel, gram=gram, **kw)
    lower, upper = fit.models
    a = 1.0 - coverage_target
    lo_fit = replace(fit, models=(lower,), sparsity_pct=(fit.sparsity_pct[0],))
    hi_fit = replace(fit, models=(upper,), sparsity_pct=(fit.sparsity_pct[1],), train_seconds=0.0)
    return PredictionInterval(lower, upper, coverage_target, a / 2.0, method="tube",
                              fits=(lo_fit, hi_fit))


def build_interval(method: str, data: Dataset, coverage_target: float, q_bar: float, c: float,
                   kernel: KernelSpec, gram=None, **kw) -> PredictionInterval:
    if method == "svqr":
        return pi_svqr(data, coverage_target, q_bar, c, kernel, gram=gram, **kw)
    if method == "ssvqr":
        return pi_ssvqr(data, coverage_target, q_bar, c, kernel, gram=gram, **kw)
    if method == "lssvr":
        return pi_lssvr(data, coverage_target, c, kernel, gram=gram)
    if method == "tube":
        return pi_tube(data, coverage_target, c, kernel, gram=gram, **kw)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def _val_scores(pi: PredictionInterval, val: Dataset):
    lo, hi = pi.bounds(val.inputs)
    p = metrics.picp(lo, hi, val.targets)
    return p, metrics.mpiw(lo, hi)


def tune_qbar(data: Dataset, val: Dataset, coverage_target: float, grid, method: str, c: float,
              kernel: KernelSpec, **kw):
    """Pick the q_bar with the narrowest validation interval among those reaching coverage.

    If no grid value reaches the target, the one with the highest validation
    PICP wins (ties: smaller MPIW, then smaller q_bar).
    Returns (q_bar, interval, table) where table lists (q_bar, picp, mpiw).
    """
    grid = sorted(float(g) for g in grid)
    if not grid:
        raise ValueError("empty q_bar grid")
    if method not in ("svqr", "ssvqr"):
        raise ValueError("q_bar tuning applies to the quantile methods svqr and ssvqr")
    for g in grid:
        quantile_levels(coverage_target, g)
    fitter = fit_svqr if method == "svqr" else fit_ssvqr
    gram = gram_matrix(kernel, data.inputs)
    cache = {}

    def level_fit(q):
        key = round(q, 12)
        if key not in cache:
            cache[key] = fitter(data, q, c, kernel, gram=gram, **kw)
        return cache[key]

    table = []
    for g in grid:
        lo_q, hi_q = quantile_levels(coverage_target, g)
        f_lo, f_hi = level_fit(lo_q), level_fit(hi_q)
        pi = PredictionInterval(f_lo.model, f_hi.model, coverage_target, g, method=method,
                                fits=(f_lo, f_hi))
        p, w = _val_scores(pi, val)
        table.append((g, p, w, pi))
    covered = [row for row in table if row[1] >= coverage_target]
    if covered:
        best = min(covered, key=lambda r: (r[2], r[0]))
    else:
        best = min(table, key=lambda r: (-r[1], r[2], r[0]))
    return best[0], best[3], [(g, p, w) for g, p, w, _ in table]


@dataclass
class GridResult:
    c: float
    width: float
    interval: PredictionInterval
    table: list  # (c, width, pice, mpiw, picp) per successful candidate
    failures: list  # (c, width, message)


def _grid_point(method, data, val, coverage_target, q_bar, c, width, family, gram, kw):
    kernel = KernelSpec(family, width)
    t0 = time.perf_counter()
    pi = build_interval(method, data, coverage_target, q_bar, c, kernel, gram=gram, **kw)
    p, w = _val_scores(pi, val)
    return pi, p, w, time.perf_counter() - t0


def grid_search(data: Dataset, val: Dataset, coverage_target: float, q_bar: float, method: str,
                c_grid=DEFAULT_POWERS, width_grid=DEFAULT_POWERS, family: str = "rbf",
                n_jobs: int = 1, **kw) -> GridResult:
    """Choose (C, width) by validation PICE, then MPIW, then smaller C, then smaller width."""
    c_grid, width_grid = list(c_grid), list(width_grid)
    if not c_grid or not width_grid:
        raise ValueError("empty hyperparameter grid")
    if family == "linear":
        width_grid = [width_grid[0]]
    points = [(c, w) for w in width_grid for c in c_grid]
    grams = {w: gram_matrix(KernelSpec(family, w), data.inputs) for w in width_grid}

    def run(c, w):
        try:
            return _grid_point(method, data, val, coverage_target, q_bar, c, w, family, grams[w], kw)
        except Exception as exc:  # collected and reported if every point fails
            return exc

    if n_jobs == 1:
        results = [run(c, w) for c, w in points]
    else:
        from joblib import Parallel, delayed
        results = Parallel(n_jobs=n_jobs)(delayed(run)(c, w) for c, w in points)

    table, failures, best = [], [], None
    for (c, w), res in zip(points, results):  # ordered reduction
        if isinstance(res, Exception):
            failures.append((c, w, f"{type(res).__name__}: {res}"))
            continue
        pi, p, width_val, _ = res
        e = metrics.pice(p, coverage_target)
        table.append((c, w, e, width_val, p))
        key = (e, width_val, c, w)
        if best is None or key < best[0]:
            best = (key, c, w, pi)
    if best is None:
        causes = "; ".join(f"C={c:g}, width={w:g}: {msg}" for c, w, msg in failures[:5])
        raise RuntimeError(f"every grid point failed ({len(failures)}): {causes}")
    return GridResult(best[1], best[2], best[3], table, failures)
