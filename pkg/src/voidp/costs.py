"""Observation penalties, integer budget costs, and the budget itself.

Penalties subtract from the objective; integer costs consume the hard
budget without touching the reward.  Both may depend on the observed
state, but state-dependent entries are legal only for conditional
planning; the open-loop subset solver rejects them.
"""

from __future__ import annotations

import numpy as np

from .errors import StateDependentCostError


def _norm_penalty(entry):
    if np.isscalar(entry):
        value = float(entry)
        if value < 0:
            raise ValueError("penalties must be nonnegative")
        return value
    arr = np.asarray(entry, dtype=float)
    if arr.ndim != 1 or np.any(arr < 0):
        raise ValueError("state-dependent penalty must be a nonnegative vector")
    arr.setflags(write=False)
    return arr


def _norm_beta(entry):
    if np.isscalar(entry):
        value = int(entry)
        if value != entry:
            raise ValueError("budget costs must be integers")
        if value < 1:
            raise ValueError("budget costs must be >= 1")
        return value
    arr = np.asarray(entry)
    if arr.ndim != 1 or np.any(arr != arr.astype(int)) or np.any(arr < 1):
        raise ValueError("state-dependent cost must be a vector of integers >= 1")
    arr = arr.astype(int)
    arr.setflags(write=False)
    return arr


class CostModel:
    """Per-variable penalties C_j, integer costs beta_j, and budget B.

    Entries may be scalars or per-state vectors.  The artificial chain
    endpoints carry zero penalty and zero cost implicitly.
    """

    def __init__(self, penalties, betas, budget):
        self.penalties = tuple(_norm_penalty(c) for c in penalties)
        self.betas = tuple(_norm_beta(b) for b in betas)
        if len(self.penalties) != len(self.betas):
            raise ValueError("penalties and costs must cover the same variables")
        self.budget = int(budget)
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")

    @classmethod
    def uniform(cls, n, budget, beta=1, penalty=0.0) -> "CostModel":
        return cls([penalty] * n, [beta] * n, budget)

    @property
    def n(self) -> int:
        return len(self.betas)

    @property
    def state_dependent(self) -> bool:
        return any(not np.isscalar(c) for c in self.penalties) or any(
            not np.isscalar(b) for b in self.betas
        )

    def require_constant(self):
        if self.state_dependent:
            raise StateDependentCostError(
                "state-dependent penalties or costs are only supported by conditional planning"
            )

    def penalty(self, j: int, x=None) -> float:
        entry = self.penalties[j - 1]
        if np.isscalar(entry):
            return float(entry)
        if x is None:
            raise ValueError(f"penalty of variable {j} depends on its state")
        return float(entry[x])

    def beta(self, j: int, x=None) -> int:
        entry = self.betas[j - 1]
        if np.isscalar(entry):
            return int(entry)
        if x is None:
            raise ValueError(f"cost of variable {j} depends on its state")
        return int(entry[x])

    def beta_vector(self, j: int, d: int) -> np.ndarray:
        entry = self.betas[j - 1]
        if np.isscalar(entry):
            return np.full(d, int(entry), dtype=int)
        return np.asarray(entry, dtype=int)

    def penalty_vector(self, j: int, d: int) -> np.ndarray:
        entry = self.penalties[j - 1]
        if np.isscalar(entry):
            return np.full(d, float(entry))
        return np.asarray(entry, dtype=float)

    def max_beta(self, j: int) -> int:
        entry = self.betas[j - 1]
        return int(entry) if np.isscalar(entry) else int(np.max(entry))

    def total_beta(self, selection) -> int:
        return sum(self.beta(j) for j in selection)
