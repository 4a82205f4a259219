"""One-step-ahead probabilistic forecasting with lag windows."""
from __future__ import annotations

import csv
import hashlib
import time
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from . import metrics
from .data import Dataset
from .kernels import KernelSpec
from .interval import DEFAULT_POWERS, METHODS, build_interval, grid_search


@dataclass
class TimeSeries:
    values: np.ndarray
    timestamps: list | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size < 2:
            raise ValueError("a series needs at least two observations")
        if self.timestamps is not None:
            ts = list(self.timestamps)
            if len(ts) != v.size:
                raise ValueError("timestamps and values differ in length")
            if any(b <= a for a, b in zip(ts, ts[1:])):
                raise ValueError("timestamps must be strictly increasing")
            self.timestamps = ts
        self.values = v

    def __len__(self) -> int:
        return self.values.size


@dataclass
class LagDataset:
    windows: np.ndarray
    targets: np.ndarray
    lag: int

    @property
    def target_index(self) -> np.ndarray:
        """Series position of each row's target."""
        return np.arange(self.targets.size) + self.lag

    def as_dataset(self, rows=None) -> Dataset:
        rows = slice(None) if rows is None else rows
        names = [f"lag{self.lag - j}" for j in range(self.lag)]
        return Dataset(self.windows[rows], self.targets[rows], names, "next")


def _parse_stamp(text: str):
    try:
        return float(text)
    except ValueError:
        return datetime.fromisoformat(text.strip())


def _column_index(sel, names, ncol: int, what: str) -> int:
    if isinstance(sel, int) or str(sel).lstrip("-").isdigit():
        j = int(sel)
        if not -ncol <= j < ncol:
            raise ValueError(f"{what} column {j} out of range for {ncol} columns")
        return j % ncol
    if names is None or sel not in names:
        raise ValueError(f"unknown {what} column {sel!r}")
    return names.index(sel)


def read_series(path, header: bool = False, column=None, time_column=None) -> TimeSeries:
    """Load a series from CSV: one value column (the last by default) and an
    optional timestamp column (numbers or ISO dates, strictly increasing)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    names = None
    if header and rows:
        names, rows = [c.strip() for c in rows[0]], rows[1:]
    if not rows:
        raise ValueError(f"{path}: no observations")
    ncol = len(rows[0])
    if any(len(r) != ncol for r in rows):
        raise ValueError(f"{path}: ragged rows")
    j = ncol - 1 if column is None else _column_index(column, names, ncol, "value")
    try:
        values = np.array([float(r[j]) for r in rows])
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric value ({exc})") from None
    stamps = None
    if time_column is not None:
        t = _column_index(time_column, names, ncol, "time")
        stamps = [_parse_stamp(r[t]) for r in rows]
    return TimeSeries(values, stamps)


def lag_embed(series: TimeSeries, p: int) -> LagDataset:
    """Rows (x[i-p+1], ..., x[i]) paired with x[i+1], in time order."""
    v = series.values
    p = int(p)
    if p < 1:
        raise ValueError("lag must be positive")
    if p >= v.size:
        raise ValueError(f"lag {p} must be smaller than the series length {v.size}")
    windows = np.lib.stride_tricks.sliding_window_view(v, p)[:-1].copy()
    return LagDataset(windows, v[p:].copy(), p)


@dataclass(frozen=True)
class ChronoSplit:
    n_train: int
    n_val: int
    n_test: int

    @property
    def n_fit(self) -> int:
        return self.n_train + self.n_val


def chrono_split(series: TimeSeries | int, train_frac: float = 0.7, val_frac_of_train: float = 0.1,
                 allow_empty_val: bool = False) -> ChronoSplit:
    """Contiguous split: the first floor(train_frac * t) points are train + validation,
    the last floor(val_frac * that) of them validation; the rest is test."""
    t = series if isinstance(series, int) else len(series)
    n_fit = int(np.floor(train_frac * t))
    n_val = int(np.floor(val_frac_of_train * n_fit))
    split = ChronoSplit(n_fit - n_val, n_val, t - n_fit)
    if split.n_train < 1 or split.n_test < 1:
        raise ValueError(f"split of {t} points leaves an empty part: {split}")
    if split.n_val < 1 and not allow_empty_val:
        raise ValueError(f"split of {t} points leaves an empty validation part")
    return split


@dataclass
class ForecastConfig:
    lags: tuple = (2, 4, 8, 12)
    c_grid: tuple = DEFAULT_POWERS
    width_grid: tuple = DEFAULT_POWERS
    family: str = "rbf"
    q_bar: float | None = None  # None: centred, (1 - coverage) / 2
    train_frac: float = 0.7
    val_frac: float = 0.1
    n_jobs: int = 1
    fit_options: dict = field(default_factory=dict)


@dataclass
class ForecastResult:
    index: np.ndarray
    y_true: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    report: metrics.ExperimentReport
    lag: int
    c: float
    width: float
    split: ChronoSplit
    split_hash: str
    interval: object = None

    def rows(self):
        return [(int(i), float(y), float(lo), float(hi))
                for i, y, lo, hi in zip(self.index, self.y_true, self.lower, self.upper)]


def _split_hash(lag: LagDataset, split: ChronoSplit) -> str:
    tidx = lag.target_index
    parts = (tidx < split.n_train, (tidx >= split.n_train) & (tidx < split.n_fit), tidx >= split.n_fit)
    h = hashlib.sha256()
    h.update(lag.windows.tobytes())
    h.update(lag.targets.tobytes())
    for mask in parts:
        h.update(np.flatnonzero(mask).astype(np.int64).tobytes())
    return h.hexdigest()[:16]


def forecast_pi(series: TimeSeries, coverage_target: float = 0.95, method: str = "ssvqr",
                config: ForecastConfig | None = None) -> ForecastResult:
    """Tune (lag, C, width) on the validation tail, refit on train + validation,
    then emit teacher-forced one-step intervals over the test part."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    cfg = config or ForecastConfig()
    split = chrono_split(series, cfg.train_frac, cfg.val_frac)
    q_bar = (1.0 - coverage_target) / 2.0 if cfg.q_bar is None else cfg.q_bar
    fit_vals = series.values[: split.n_fit]
    lo_v, hi_v = float(fit_vals.min()), float(fit_vals.max())
    span = hi_v - lo_v if hi_v > lo_v else 1.0
    scaled = TimeSeries((series.values - lo_v) / span)

    best = None
    for p in cfg.lags:
        if p >= split.n_train:
            continue
        emb = lag_embed(scaled, p)
        tidx = emb.target_index
        tr = emb.as_dataset(tidx < split.n_train)
        va = emb.as_dataset((tidx >= split.n_train) & (tidx < split.n_fit))
        if len(tr) < 2 or len(va) < 1:
            continue
        gs = grid_search(tr, va, coverage_target, q_bar, method, cfg.c_grid, cfg.width_grid,
                         cfg.family, n_jobs=cfg.n_jobs, **cfg.fit_options)
        row = next(r for r in gs.table if r[0] == gs.c and r[1] == gs.width)
        key = (row[2], row[3], p)
        if best is None or key < best[0]:
            best = (key, p, gs.c, gs.width)
    if best is None:
        raise ValueError("no lag in the grid leaves enough training windows")
    _, p, c, width = best

    emb = lag_embed(scaled, p)
    tidx = emb.target_index
    fit_rows = tidx < split.n_fit
    test_rows = ~fit_rows
    t0 = time.perf_counter()
    pi = build_interval(method, emb.as_dataset(fit_rows), coverage_target, q_bar, c,
                        KernelSpec(cfg.family, width), **cfg.fit_options)
    elapsed = time.perf_counter() - t0
    test = emb.as_dataset(test_rows)
    raw_lo, raw_hi = pi.raw_bounds(test.inputs)
    lo_s, hi_s = pi.bounds(test.inputs)
    lower, upper = lo_s * span + lo_v, hi_s * span + lo_v
    y_true = series.values[tidx[test_rows]]
    sp = tuple(f.sparsity_pct[0] for f in pi.fits) if len(pi.fits) == 2 else (0.0, 0.0)
    report = metrics.evaluate_interval(lower, upper, y_true, coverage_target, sparsity=sp,
                                       train_seconds=elapsed)
    report.crossing_fraction = metrics.crossing_fraction(raw_lo, raw_hi)
    return ForecastResult(tidx[test_rows], y_true, lower, upper, report, p, c, width, split,
                          _split_hash(emb, split), pi)
