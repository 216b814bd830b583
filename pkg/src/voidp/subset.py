"""Optimal open-loop observation subsets by dynamic programming.

The chain is cut at the selected indices; the table entry ``L[a, b, k]``
is the best expected reward for the sub-chain strictly between a and b
with budget k, where a and b are already observed (b only matters when
smoothing).  Selecting j splits (a, b) into (a, j) with zero budget and
(j, b) with the remainder; the order of open-loop observations is
irrelevant, so no other budget split needs to be examined.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .costs import CostModel
from .model import ChainModel, Mode
from .rewards import (RewardSpec, expected_local_reward, expected_penalty,
                      self_expected_reward)


@dataclass(frozen=True)
class SubsetResult:
    """Solution of the budgeted subset problem.

    ``tables[a, b, k]`` and ``traceback[a, b, k]`` cover all sub-chains
    0 <= a < b <= n+1 and budgets 0..B; traceback entries are -1 for
    "stop" and the split index otherwise (-2 marks unused cells).
    """

    selected: tuple
    value: float
    tables: np.ndarray
    traceback: np.ndarray
    eval_count: int
    mode: Mode
    budget: int

    def replay_traceback(self, betas) -> tuple:
        """Re-derive the selected set from the traceback tables."""
        n = self.tables.shape[0] - 2
        a, b, k = 0, n + 1, self.budget
        chosen = []
        while True:
            j = int(self.traceback[a, b, k])
            if j < 0:
                break
            chosen.append(j)
            k -= int(betas[j - 1])
            a = j
        return tuple(sorted(chosen))


class _SegmentRewards:
    """Expected-reward provider for single-chain segments, with counting."""

    def __init__(self, model, spec, mode):
        self.model = model
        self.spec = spec
        self.mode = mode
        self.evals = 0

    def interior_sum(self, a: int, b: int) -> float:
        n = self.model.n
        total = 0.0
        for j in range(a + 1, b):
            seps = []
            if a >= 1:
                seps.append(a)
            if self.mode is Mode.SMOOTHING and b <= n:
                seps.append(b)
            total += expected_local_reward(self.model, self.spec, j, tuple(seps), self.mode)
            self.evals += 1
        return total

    def self_reward(self, j: int) -> float:
        self.evals += 1
        return self_expected_reward(self.model, self.spec, j)


def select_subset(model: ChainModel, spec: RewardSpec, costs: CostModel,
                  mode=Mode.SMOOTHING, _provider=None) -> SubsetResult:
    """Compute the best observation set with total cost within the budget.

    State-dependent penalties or costs are rejected: an open-loop
    selection cannot react to states.  Ties between split choices go to
    the smallest index, with "stop" preferred on exact ties.
    """
    mode = Mode.coerce(mode)
    costs.require_constant()
    n = model.n
    if costs.n != n:
        raise ValueError(f"cost model covers {costs.n} variables, model has {n}")
    provider = _provider
    if provider is None:
        spec.validate_for(model)
        provider = _SegmentRewards(model, spec, mode)
    budget = costs.budget
    betas = [costs.beta(j) for j in range(1, n + 1)]

    base = np.full((n + 2, n + 2), np.nan)
    for a in range(n + 1):
        for b in range(a + 1, n + 2):
            base[a, b] = provider.interior_sum(a, b)
    self_net = np.zeros(n + 1)
    for j in range(1, n + 1):
        self_net[j] = provider.self_reward(j) - expected_penalty(model, costs, j)

    tables = np.full((n + 2, n + 2, budget + 1), np.nan)
    traceback = np.full((n + 2, n + 2, budget + 1), -2, dtype=int)
    for a in range(n + 1):
        for b in range(a + 1, n + 2):
            tables[a, b, 0] = base[a, b]
            traceback[a, b, 0] = -1
    for k in range(1, budget + 1):
        for a in range(n + 1):
            for b in range(a + 1, n + 2):
                best = base[a, b]
                pick = -1
                for j in range(a + 1, b):
                    bj = betas[j - 1]
                    if bj > k:
                        continue
                    cand = self_net[j] + base[a, j] + tables[j, b, k - bj]
                    if cand > best:
                        best = cand
                        pick = j
                tables[a, b, k] = best
                traceback[a, b, k] = pick

    selected = []
    a, b, k = 0, n + 1, budget
    while True:
        j = int(traceback[a, b, k])
        if j < 0:
            break
        selected.append(j)
        k -= betas[j - 1]
        a = j
    return SubsetResult(
        selected=tuple(sorted(selected)),
        value=float(tables[0, n + 1, budget]),
        tables=tables,
        traceback=traceback,
        eval_count=provider.evals,
        mode=mode,
        budget=budget,
    )
