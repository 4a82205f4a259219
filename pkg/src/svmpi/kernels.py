"""Kernel evaluation and Gram matrices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LINEAR = "linear"
RBF = "rbf"
FAMILIES = (LINEAR, RBF)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus its width.

    ``width`` is the coefficient in ``exp(-width * ||a - b||^2)``; the linear
    kernel ignores it.
    """

    family: str = RBF
    width: float = 1.0

    def __post_init__(self):
        family = str(self.family).lower()
        if family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "width", float(self.width))
        if family == RBF and not self.width > 0:
            raise ValueError(f"RBF width must be positive, got {self.width}")


def _as_rows(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2:
        raise ValueError(f"expected a matrix of feature vectors, got shape {x.shape}")
    return x


def kernel_eval(spec: KernelSpec, a, b) -> float:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    if spec.family == LINEAR:
        return float(a @ b)
    d = a - b
    return float(np.exp(-spec.width * (d @ d)))


def gram_matrix(spec: KernelSpec, rows, cols=None) -> np.ndarray:
    """Dense kernel matrix with entry (i, j) = k(rows[i], cols[j]).

    When ``cols`` is omitted the square matrix over ``rows`` is returned and
    symmetrised exactly.
    """
    rows = _as_rows(rows)
    same = cols is None
    cols = rows if same else _as_rows(cols)
    if rows.shape[1] != cols.shape[1]:
        raise ValueError(f"dimension mismatch: {rows.shape[1]} vs {cols.shape[1]}")
    if spec.family == LINEAR:
        g = rows @ cols.T
    else:
        # direct differences keep k(x, x) == 1 exactly; the expanded
        # |a|^2 + |b|^2 - 2ab form loses that to cancellation.
        sq = np.zeros((rows.shape[0], cols.shape[0]))
        for j in range(rows.shape[1]):
            diff = rows[:, j, None] - cols[None, :, j]
            sq += diff * diff
        g = np.exp(-spec.width * sq)
    if same:
        g = 0.5 * (g + g.T)
    return g
