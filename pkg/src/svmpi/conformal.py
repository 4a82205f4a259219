"""Split conformal calibration of quantile-pair intervals."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset
from .interval import PredictionInterval


@dataclass
class CalibrationResult:
    scores: np.ndarray
    offset: float
    level_index: int
    alpha: float

    @property
    def degenerate(self) -> bool:
        """True when the calibration set is too small for the requested alpha."""
        return self.level_index > self.scores.size

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "level_index": self.level_index,
                "offset": self.offset if np.isfinite(self.offset) else "inf",
                "degenerate": self.degenerate, "scores": self.scores.tolist()}


def split_train_calibrate(data: Dataset, calib_fraction: float = 0.5, seed: int = 0):
    """Seeded random partition into (proper training set, calibration set).

    The calibration part has round(calib_fraction * m) rows, clamped to [1, m - 1].
    """
    m = len(data)
    if not 0 < calib_fraction < 1:
        raise ValueError("calib_fraction must lie in (0, 1)")
    if m < 2:
        raise ValueError("need at least two rows to split")
    n_cal = min(max(int(round(calib_fraction * m)), 1), m - 1)
    perm = np.random.default_rng(np.random.SeedSequence(int(seed))).permutation(m)
    cal = np.sort(perm[:n_cal])
    fit = np.sort(perm[n_cal:])
    return data.subset(fit), data.subset(cal)


def nonconformity_scores(pi: PredictionInterval, calib: Dataset) -> np.ndarray:
    """max(lower(x) - y, y - upper(x)) per calibration row; negative inside the interval."""
    if pi.conformal_offset:
        raise ValueError("scores must be computed on an uncalibrated interval")
    lo, hi = pi.raw_bounds(calib.inputs)
    return np.maximum(lo - calib.targets, calib.targets - hi)


def conformal_quantile(scores, alpha: float):
    """The ceil((1 - alpha)(n + 1))-th smallest score, or +inf when that rank exceeds n."""
    scores = np.asarray(scores, dtype=float).ravel()
    if scores.size == 0:
        raise ValueError("no calibration scores")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    n = scores.size
    # guard the ceiling against products like 0.9 * 100 = 90.00000000000001
    level = (1.0 - alpha) * (n + 1)
    k = int(math.ceil(round(level, 9)))
    k = max(k, 1)
    if k > n:
        return math.inf, k
    return float(np.sort(scores, kind="stable")[k - 1]), k


def calibrate(pi: PredictionInterval, calib: Dataset, alpha: float) -> CalibrationResult:
    scores = nonconformity_scores(pi, calib)
    offset, k = conformal_quantile(scores, alpha)
    return CalibrationResult(scores, offset, k, alpha)


def conformalize(pi: PredictionInterval, calib: Dataset, alpha: float):
    """Widen both bounds by the conformal offset.

    Returns (calibrated interval, CalibrationResult).
    """
    result = calibrate(pi, calib, alpha)
    return replace(pi, conformal_offset=result.offset), result
