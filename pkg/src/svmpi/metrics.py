"""Interval and quantile quality metrics."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


def _pair(a, b):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    return a, b


def picp(lower, upper, y) -> float:
    """Fraction of targets inside [lower, upper], endpoints included."""
    lower, upper = _pair(lower, upper)
    _, y = _pair(lower, y)
    if y.size == 0:
        raise ValueError("empty input")
    return float(np.mean((lower <= y) & (y <= upper)))


def mpiw(lower, upper) -> float:
    lower, upper = _pair(lower, upper)
    if lower.size == 0:
        raise ValueError("empty input")
    return float(np.mean(upper - lower))


def pice(picp_value: float, coverage_target: float) -> float:
    return max(0.0, coverage_target - picp_value)


def coverage_probability(predictions, y) -> float:
    """Fraction of targets at or below a quantile estimate."""
    predictions, y = _pair(predictions, y)
    if y.size == 0:
        raise ValueError("empty input")
    return float(np.mean(y <= predictions))


def quantile_rmse(estimate, truth) -> float:
    estimate, truth = _pair(estimate, truth)
    return float(np.sqrt(np.mean((estimate - truth) ** 2)))


def crossing_fraction(lower, upper) -> float:
    lower, upper = _pair(lower, upper)
    return float(np.mean(lower > upper)) if lower.size else 0.0


def repair_crossing(lower, upper):
    """Pointwise [min, max] so that lower <= upper everywhere."""
    lower, upper = _pair(lower, upper)
    return np.minimum(lower, upper), np.maximum(lower, upper)


@dataclass
class ExperimentReport:
    picp: float
    mpiw: float
    pice: float
    cp_lower: float
    cp_upper: float
    sparsity_lower_pct: float = 0.0
    sparsity_upper_pct: float = 0.0
    rmse_lower: float | None = None
    rmse_upper: float | None = None
    train_seconds: float = 0.0
    crossing_fraction: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate_interval(lower, upper, y, coverage_target: float, *, truth_lower=None,
                      truth_upper=None, sparsity=(0.0, 0.0), train_seconds=0.0) -> ExperimentReport:
    """Metric bundle for raw bound predictions; crossings are repaired first."""
    cross = crossing_fraction(lower, upper)
    lo, hi = repair_crossing(lower, upper)
    p = picp(lo, hi, y)
    return ExperimentReport(
        picp=p,
        mpiw=mpiw(lo, hi),
        pice=pice(p, coverage_target),
        cp_lower=coverage_probability(lo, y),
        cp_upper=coverage_probability(hi, y),
        sparsity_lower_pct=float(sparsity[0]),
        sparsity_upper_pct=float(sparsity[1]),
        rmse_lower=None if truth_lower is None else quantile_rmse(lo, truth_lower),
        rmse_upper=None if truth_upper is None else quantile_rmse(hi, truth_upper),
        train_seconds=float(train_seconds),
        crossing_fraction=cross,
    )


def stable_std(values) -> float:
    """Population standard deviation computed on values shifted by the first one.

    The shift leaves the statistic unchanged but makes it exactly 0.0 for
    identical values, where the plain formula can leave a rounding residue
    from the mean.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("no values")
    return float(np.std(v - v[0]))
