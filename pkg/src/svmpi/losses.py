"""Pinball loss, Tube loss and the LUBE coverage-width criterion."""
from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class TubeParams:
    """Parameters of the Tube loss problem.

    coverage_target is 1 - alpha; ``r`` moves the tube (0.5 centres it);
    ``delta`` penalises width and ``lam`` is the ridge weight on the
    kernel-expansion coefficients.
    """

    coverage_target: float = 0.95
    r: float = 0.5
    delta: float = 0.0
    lam: float = 1e-3

    def __post_init__(self):
        if not 0 < self.coverage_target < 1:
            raise ValueError(f"coverage_target must lie in (0, 1), got {self.coverage_target}")
        if not 0 < self.r < 1:
            raise ValueError(f"r must lie in (0, 1), got {self.r}")
        if self.delta < 0 or self.lam < 0:
            raise ValueError("delta and lam must be nonnegative")

    @property
    def alpha(self) -> float:
        return 1.0 - self.coverage_target


def pinball(q: float, u: float) -> float:
    if not 0 < q < 1:
        raise ValueError(f"quantile level must lie in (0, 1), got {q}")
    return q * u if u >= 0 else (q - 1.0) * u


def tube_branch(params: TubeParams, u2: float, u1: float) -> int:
    """Index (1-4) of the Tube loss piece active at (u2, u1)."""
    if u2 > u1:
        raise ValueError(f"malformed bound pair: u2={u2} > u1={u1}")
    if u2 > 0:
        return 1
    if u1 < 0:
        return 4
    if params.r * u2 + (1.0 - params.r) * u1 >= 0:
        return 2
    return 3


def tube_loss(params: TubeParams, u2: float, u1: float) -> float:
    """Tube loss of the residual pair.

    ``u2`` is the residual against the upper bound and ``u1`` against the
    lower bound (both ``y - bound``), so ``u2 <= u1`` for a well-ordered tube.
    """
    a = params.alpha
    branch = tube_branch(params, u2, u1)
    if branch == 1:
        return (1.0 - a) * u2
    if branch == 2:
        return -a * u2
    if branch == 3:
        return a * u1
    return -(1.0 - a) * u1


def cwc(mpiw: float, picp: float, y_range: float, eta: float = 50.0,
        coverage_target: float = 0.95) -> float:
    """LUBE coverage-width criterion (diagnostic only, never optimised)."""
    if not y_range > 0:
        raise ValueError(f"y_range must be positive, got {y_range}")
    if mpiw < 0:
        raise ValueError(f"mpiw must be nonnegative, got {mpiw}")
    penalty = 0.0 if picp >= coverage_target else 1.0
    return mpiw / y_range * (1.0 + penalty * math.exp(-eta * (picp - coverage_target)))
