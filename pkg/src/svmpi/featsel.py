"""Feature selection from linear-kernel sparse SVQR weight vectors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .interval import PredictionInterval, pi_ssvqr, quantile_levels
from .kernels import KernelSpec, gram_matrix
from .metrics import ExperimentReport
from .models import fit_ssvqr

LINEAR = KernelSpec("linear")


@dataclass
class FeatureSelection:
    kept: list
    dropped: list
    w_lower: np.ndarray        # weights on standardised features (thresholded)
    w_upper: np.ndarray
    eps: float
    w_lower_raw: np.ndarray    # same weights in original feature units
    w_upper_raw: np.ndarray
    names: list

    @property
    def reduced_pct(self) -> float:
        n = len(self.kept) + len(self.dropped)
        return 100.0 * len(self.dropped) / n

    def report_lines(self) -> list[str]:
        lines = [f"eps: {self.eps!r}",
                 f"n_features: {len(self.kept) + len(self.dropped)}",
                 f"kept: {' '.join(str(i) for i in self.kept)}",
                 f"dropped: {' '.join(str(i) for i in self.dropped)}",
                 f"reduced_pct: {self.reduced_pct!r}",
                 "feature,name,w_lower,w_upper,w_lower_raw,w_upper_raw,kept"]
        keep = set(self.kept)
        for j, name in enumerate(self.names):
            lines.append(f"{j},{name},{self.w_lower[j]!r},{self.w_upper[j]!r},"
                         f"{self.w_lower_raw[j]!r},{self.w_upper_raw[j]!r},{int(j in keep)}")
        return lines


def standardize(x: np.ndarray):
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    return (x - mu) / sd, mu, sd


def select_features(data: Dataset, coverage_target: float = 0.95, q_bar: float = 0.025,
                    eps: float | None = None, c: float = 1.0, eps_rel: float = 1e-4,
                    standardize_inputs: bool = True, **fit_kw) -> FeatureSelection:
    """Drop features whose weight is at most ``eps`` in both quantile-level fits.

    Each level is fitted with the linear kernel, and its primal weight vector
    is recovered as A^T (r - p). Without an explicit ``eps``, the threshold is
    ``eps_rel`` times the largest weight magnitude across both fits.
    """
    if data.n_features < 1:
        raise ValueError("no features")
    lo_q, hi_q = quantile_levels(coverage_target, q_bar)
    if standardize_inputs:
        a, _, sd = standardize(data.inputs)
    else:
        a, sd = data.inputs, np.ones(data.n_features)
    scaled = Dataset(a, data.targets)
    gram = gram_matrix(LINEAR, a)
    weights = []
    for q in (lo_q, hi_q):
        fit = fit_ssvqr(scaled, q, c, LINEAR, gram=gram, **fit_kw)
        weights.append(a.T @ fit.model.coefficients)
    w_lo, w_hi = weights
    if eps is None:
        eps = eps_rel * max(np.abs(w_lo).max(), np.abs(w_hi).max())
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    small = (np.abs(w_lo) <= eps) & (np.abs(w_hi) <= eps)
    return FeatureSelection(
        kept=[int(j) for j in np.flatnonzero(~small)],
        dropped=[int(j) for j in np.flatnonzero(small)],
        w_lower=w_lo, w_upper=w_hi, eps=float(eps),
        w_lower_raw=w_lo / sd, w_upper_raw=w_hi / sd, names=data.names(),
    )


@dataclass
class SelectionComparison:
    before: ExperimentReport
    after: ExperimentReport
    reduced_pct: float
    interval_before: PredictionInterval
    interval_after: PredictionInterval

    def rows(self):
        return [("before", self.before), ("after", self.after)]


def refit_on_selection(data: Dataset, sel: FeatureSelection, coverage_target: float = 0.95,
                       q_bar: float = 0.025, c: float = 1.0, test: Dataset | None = None,
                       **fit_kw) -> SelectionComparison:
    """Linear sparse-SVQR interval on all features vs on the kept ones.

    Inputs are standardised with the training statistics. Metrics are
    computed on ``test`` when given, else on the training data.
    """
    if not sel.kept:
        raise ValueError("the selection keeps no features")
    _, mu, sd = standardize(data.inputs)
    train = Dataset((data.inputs - mu) / sd, data.targets, data.column_names)
    evald = train if test is None else Dataset((test.inputs - mu) / sd, test.targets, test.column_names)
    pi_all = pi_ssvqr(train, coverage_target, q_bar, c, LINEAR, **fit_kw)
    if len(sel.kept) == data.n_features:
        pi_sel = pi_all
    else:
        pi_sel = pi_ssvqr(train.select_features(sel.kept), coverage_target, q_bar, c, LINEAR, **fit_kw)
    before = pi_all.evaluate(evald)
    after = pi_sel.evaluate(evald.select_features(sel.kept))
    return SelectionComparison(before, after, sel.reduced_pct, pi_all, pi_sel)
