"""Datasets, the AD1-AD6 generators with their true-quantile oracles, CSV I/O."""
from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

AD_IDS = ("AD1", "AD2", "AD3", "AD4", "AD5", "AD6")

# noise law per generator: (kind, parameter)
_NOISE = {
    "AD1": ("normal", 0.6),
    "AD2": ("chi2", 3),
    "AD3": ("normal", 0.4),
    "AD4": ("normal", 0.8),
    "AD5": ("uniform", 5.0),
    "AD6": ("uniform", 4.0),
}


@dataclass
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    column_names: list[str] | None = None
    target_name: str | None = None

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        y = np.asarray(self.targets, dtype=float).ravel()
        if x.ndim != 2 or x.shape[1] < 1:
            raise ValueError(f"inputs must be an m x n matrix with n >= 1, got {x.shape}")
        if x.shape[0] != y.size:
            raise ValueError(f"row count mismatch: {x.shape[0]} inputs vs {y.size} targets")
        if self.column_names is not None and len(self.column_names) != x.shape[1]:
            raise ValueError("column_names length does not match feature count")
        self.inputs = x
        self.targets = y

    def __len__(self) -> int:
        return self.targets.size

    @property
    def n_features(self) -> int:
        return self.inputs.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.inputs[idx], self.targets[idx], self.column_names, self.target_name)

    def select_features(self, cols) -> "Dataset":
        cols = list(cols)
        names = None if self.column_names is None else [self.column_names[c] for c in cols]
        return Dataset(self.inputs[:, cols], self.targets, names, self.target_name)

    def names(self) -> list[str]:
        if self.column_names is not None:
            return list(self.column_names)
        return [f"x{j}" for j in range(self.n_features)]


# --- generators -------------------------------------------------------------

def mean_function(x):
    x = np.asarray(x, dtype=float)
    return (1.0 - x + 2.0 * x ** 2) * np.exp(-0.5 * x ** 2)


def _check_id(ad_id: str) -> str:
    key = str(ad_id).upper()
    if key not in _NOISE:
        raise ValueError(f"unknown artificial dataset {ad_id!r}; expected one of {AD_IDS}")
    return key


def _normal_scale(param: float, variance: bool) -> float:
    return float(np.sqrt(param)) if variance else float(param)


def sample_noise(ad_id: str, size: int, rng: np.random.Generator, variance: bool = False) -> np.ndarray:
    kind, param = _NOISE[_check_id(ad_id)]
    if kind == "normal":
        return rng.normal(0.0, _normal_scale(param, variance), size)
    if kind == "chi2":
        # sum of squared standard normals
        return np.sum(rng.standard_normal((size, int(param))) ** 2, axis=1)
    return rng.uniform(-param, param, size)


def generate_ad(ad_id: str, m: int, seed: int = 0, variance: bool = False) -> Dataset:
    """Draw ``m`` points x ~ U(-5, 5), y = mean_function(x) + noise.

    ``variance=True`` reads the second parameter of N(0, s) as a variance
    instead of a standard deviation.
    """
    key = _check_id(ad_id)
    if m < 1:
        raise ValueError("m must be positive")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    x = rng.uniform(-5.0, 5.0, m)
    y = mean_function(x) + sample_noise(key, m, rng, variance)
    return Dataset(x[:, None], y, ["x"], "y")


SPARSE_BETA = (3.0, -2.0, 1.5, -1.0, 0.5)


def generate_sparse_linear(m: int, n_features: int = 100, n_relevant: int = 5,
                           noise_sd: float = 1.0, seed: int = 0) -> Dataset:
    """High-dimensional linear data where only the first ``n_relevant`` features matter.

    x ~ N(0, I), y = x[:, :n_relevant] @ beta + N(0, noise_sd^2), with beta
    cycling through ``SPARSE_BETA``.
    """
    if m < 1 or n_features < 1:
        raise ValueError("m and n_features must be positive")
    if not 0 <= n_relevant <= n_features:
        raise ValueError("n_relevant must lie in [0, n_features]")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    x = rng.standard_normal((m, n_features))
    beta = np.zeros(n_features)
    beta[:n_relevant] = np.resize(SPARSE_BETA, n_relevant)
    y = x @ beta + noise_sd * rng.standard_normal(m)
    return Dataset(x, y, [f"x{j}" for j in range(n_features)], "y")


def noise_quantile(ad_id: str, q, variance: bool = False):
    kind, param = _NOISE[_check_id(ad_id)]
    q = np.asarray(q, dtype=float)
    if np.any((q <= 0) | (q >= 1)):
        raise ValueError("quantile level must lie in (0, 1)")
    if kind == "normal":
        return stats.norm.ppf(q, scale=_normal_scale(param, variance))
    if kind == "chi2":
        return stats.chi2.ppf(q, df=param)
    return -param + 2.0 * param * q


def true_quantile(ad_id: str, q: float, x, variance: bool = False):
    """Conditional q-quantile of y given x for an AD generator."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        x = x[:, 0]
    return mean_function(x) + noise_quantile(ad_id, q, variance)


# --- splitting ----------------------------------------------------------------

def train_test_split(data: Dataset, n_train: int):
    if not 0 < n_train < len(data):
        raise ValueError("n_train must leave both parts nonempty")
    idx = np.arange(len(data))
    return data.subset(idx[:n_train]), data.subset(idx[n_train:])


def holdout_split(data: Dataset, fraction: float = 0.1, chronological: bool = False, seed: int = 0):
    """Hold out a validation part: the tail rows or a seeded random subset."""
    m = len(data)
    n_val = int(round(fraction * m))
    n_val = min(max(n_val, 1), m - 1)
    if chronological:
        idx = np.arange(m)
    else:
        idx = np.random.default_rng(np.random.SeedSequence(int(seed))).permutation(m)
    fit_idx, val_idx = np.sort(idx[: m - n_val]), np.sort(idx[m - n_val:])
    return data.subset(fit_idx), data.subset(val_idx)


# --- CSV ------------------------------------------------------------------------

def read_csv(path, header: bool = True, target: str | int | None = None) -> Dataset:
    """Load a numeric CSV; the last column is the target unless ``target`` names one."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: empty file")
    names = None
    if header:
        names, rows = [c.strip() for c in rows[0]], rows[1:]
    try:
        table = np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric cell ({exc})") from None
    if table.ndim != 2 or table.shape[1] < 2:
        raise ValueError(f"{path}: need at least one feature column and one target column")
    ncol = table.shape[1]
    if names is None:
        names = [f"x{j}" for j in range(ncol - 1)] + ["y"]
    if target is None:
        t = ncol - 1
    elif isinstance(target, int) or (isinstance(target, str) and target.lstrip("-").isdigit()):
        t = int(target) % ncol
    elif target in names:
        t = names.index(target)
    else:
        raise ValueError(f"{path}: unknown target column {target!r}")
    feats = [j for j in range(ncol) if j != t]
    return Dataset(table[:, feats], table[:, t], [names[j] for j in feats], names[t])


def format_float(v: float) -> str:
    return repr(float(v))


def write_csv(path, header, rows) -> None:
    """Write rows atomically (temporary file then rename)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(header)
    for r in rows:
        w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in r])
    atomic_write(path, buf.getvalue())


def write_dataset(path, data: Dataset) -> None:
    header = data.names() + [data.target_name or "y"]
    rows = (list(x) + [y] for x, y in zip(data.inputs, data.targets))
    write_csv(path, header, rows)


def atomic_write(path, text: str) -> None:
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
