from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


class SolverError(RuntimeError):
    """Raised by model fitting when a solve ends in a non-optimal status."""

    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


@dataclass(frozen=True)
class Certificate:
    primal: float = np.inf
    dual: float = np.inf
    complementarity: float = np.inf

    def worst(self) -> float:
        return max(self.primal, self.dual, self.complementarity)


@dataclass
class SolverSolution:
    variables: np.ndarray
    objective_value: float
    status: str
    certificate: Certificate = field(default_factory=Certificate)
    iterations: int = 0
    # problem-specific multipliers (LP row duals, QP equality multiplier)
    duals: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL
