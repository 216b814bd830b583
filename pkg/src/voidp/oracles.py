"""Exhaustive ground-truth evaluation on explicit joint tables.

Everything here works by brute enumeration over a dense probability
table, with no chain decomposition, so the dynamic programs elsewhere in
the package can be certified against an independent computation path.
The module also hosts the selection baselines (greedy, uniform spacing).
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .costs import CostModel
from .errors import EnumerationCapError
from .model import ChainModel, Mode
from .rewards import (DecisionVoi, Expectation, JointEntropy, Margin,
                      ResidualEntropy, RewardSpec, WeightedVariance,
                      batch_reward, point_reward, total_objective)

_ENTROPY = ResidualEntropy()

JOINT_CELL_CAP = 1 << 20
PLAN_TREE_CAP = 4


class ExplicitJoint:
    """Dense joint distribution over a small set of discrete variables."""

    def __init__(self, table, state_values=None):
        table = np.asarray(table, dtype=float)
        if table.size > JOINT_CELL_CAP:
            raise EnumerationCapError(
                f"joint table with {table.size} cells exceeds the cap of {JOINT_CELL_CAP}"
            )
        if np.any(table < 0):
            raise ValueError("joint table has negative entries")
        if abs(table.sum() - 1.0) > 1e-9:
            raise ValueError(f"joint table sums to {table.sum():.12g}")
        table.setflags(write=False)
        self.table = table
        self.state_values = None if state_values is None else tuple(
            np.asarray(v, dtype=float) for v in state_values
        )

    @property
    def n(self) -> int:
        return self.table.ndim

    @property
    def domains(self) -> tuple:
        return self.table.shape

    def values_of(self, j: int) -> np.ndarray:
        if self.state_values is None:
            raise ValueError("joint carries no state values")
        return self.state_values[j - 1]

    def _reduced(self, keep, reduce="sum") -> np.ndarray:
        """Marginal (or max) table over ``keep``, axes in the given order."""
        others = tuple(ax for ax in range(self.n) if ax + 1 not in keep)
        if reduce == "sum":
            out = self.table.sum(axis=others) if others else self.table
        else:
            out = self.table.max(axis=others) if others else self.table
        remaining = [j for j in range(1, self.n + 1) if j in keep]
        order = [remaining.index(j) for j in keep]
        return np.transpose(out, order)

    def prob(self, assignment: dict) -> float:
        """Probability of a partial assignment."""
        if not assignment:
            return 1.0
        keep = sorted(assignment)
        sub = self._reduced(keep, "sum")
        return float(sub[tuple(assignment[j] for j in keep)])

    def marginal(self, j: int, evidence=None) -> np.ndarray:
        """Conditional marginal P(X_j | evidence)."""
        evidence = evidence or {}
        if j in evidence:
            if self.prob(evidence) <= 0.0:
                raise ValueError(f"evidence {evidence} has probability zero")
            vec = np.zeros(self.domains[j - 1])
            vec[evidence[j]] = 1.0
            return vec
        keep = sorted(evidence) + [j]
        sub = self._reduced(keep, "sum")
        vec = sub[tuple(evidence[i] for i in sorted(evidence))]
        z = vec.sum()
        if z <= 0.0:
            raise ValueError(f"evidence {evidence} has probability zero")
        return vec / z

    def max_marginal(self, j: int, evidence=None) -> np.ndarray:
        """Per-state maxima over assignments consistent with the evidence."""
        evidence = evidence or {}
        z = self.prob(evidence)
        if z <= 0.0:
            raise ValueError(f"evidence {evidence} has probability zero")
        if j in evidence:
            keep = sorted(evidence)
            mx = self._reduced(keep, "max")
            vec = np.zeros(self.domains[j - 1])
            vec[evidence[j]] = mx[tuple(evidence[i] for i in keep)] / z
            return vec
        keep = sorted(evidence) + [j]
        mx = self._reduced(keep, "max")
        vec = mx[tuple(evidence[i] for i in sorted(evidence))]
        return vec / z


def joint_from_chain(model: ChainModel) -> ExplicitJoint:
    """Expand a chain into its dense joint table."""
    cells = 1
    for d in model.domains:
        cells *= d
    if cells > JOINT_CELL_CAP:
        raise EnumerationCapError(
            f"chain expands to {cells} cells, cap is {JOINT_CELL_CAP}"
        )
    table = model.prior.copy()
    for t in model.transitions:
        table = table[..., None] * t[(None,) * (table.ndim - 1)]
    return ExplicitJoint(table, state_values=model.state_values)


def _nearest_separators(indices, j, mode: Mode):
    past = [i for i in indices if i < j]
    keep = []
    if past:
        keep.append(max(past))
    if mode is Mode.SMOOTHING:
        future = [i for i in indices if i > j]
        if future:
            keep.append(min(future))
    return keep


def _oracle_values(joint, spec, j):
    if isinstance(spec.of(j), (Expectation, WeightedVariance)):
        return joint.values_of(j)
    return None


def _local_reward_sum(joint: ExplicitJoint, spec: RewardSpec, j: int,
                      observed, mode: Mode) -> float:
    """Expected local reward of variable j under observation set ``observed``."""
    variant = spec.of(j)
    vals = _oracle_values(joint, spec, j)
    if j in observed:
        if isinstance(variant, Margin):
            return float(joint.max_marginal(j).sum())
        if isinstance(variant, JointEntropy):
            return 0.0
        pj = joint.marginal(j)
        d = joint.domains[j - 1]
        return float(pj @ batch_reward(variant, np.eye(d), vals))
    ev_idx = sorted(i for i in observed if mode is Mode.SMOOTHING or i <= j)
    if isinstance(variant, JointEntropy):
        given = sorted(set(range(1, j)) | set(ev_idx))
        return -_cond_entropy(joint, j, given)
    if isinstance(variant, Margin):
        ev_idx = _nearest_separators(ev_idx, j, mode)
        weights = joint._reduced(ev_idx + [j], "sum").reshape(-1, joint.domains[j - 1]).sum(axis=1)
        mx = joint._reduced(ev_idx + [j], "max").reshape(-1, joint.domains[j - 1])
        rows = np.divide(mx, weights[:, None], out=np.zeros_like(mx), where=weights[:, None] > 0)
        return float(weights @ batch_reward(variant, rows, None))
    sub = joint._reduced(ev_idx + [j], "sum").reshape(-1, joint.domains[j - 1])
    weights = sub.sum(axis=1)
    rows = np.divide(sub, weights[:, None],
                     out=np.full_like(sub, 1.0 / sub.shape[1]),
                     where=weights[:, None] > 0)
    return float(weights @ batch_reward(variant, rows, vals))


def _cond_entropy(joint: ExplicitJoint, j: int, given) -> float:
    """H(X_j | X_given) in bits, from the dense table."""
    sub = joint._reduced(list(given) + [j], "sum").reshape(-1, joint.domains[j - 1])
    weights = sub.sum(axis=1)
    rows = np.divide(sub, weights[:, None],
                     out=np.full_like(sub, 1.0 / sub.shape[1]),
                     where=weights[:, None] > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.where(rows > 0, rows * np.log2(np.where(rows > 0, rows, 1.0)), 0.0).sum(axis=1)
    return float(-(weights @ h))


def oracle_total_reward(joint: ExplicitJoint, spec: RewardSpec, costs: CostModel,
                        selection, mode=Mode.SMOOTHING) -> float:
    """Objective of an observation set, evaluated literally by enumeration.

    Each variable's expected reward is summed over every assignment of the
    conditioning set, with no chain decomposition.  Filtering restricts
    each variable's conditioning to observations at indices <= its own.
    """
    mode = Mode.coerce(mode)
    observed = sorted(set(int(j) for j in selection))
    if any(not 1 <= j <= joint.n for j in observed):
        raise ValueError(f"selection {observed} out of range 1..{joint.n}")
    total = 0.0
    for j in range(1, joint.n + 1):
        total += _local_reward_sum(joint, spec, j, observed, mode)
    for j in observed:
        entry = costs.penalties[j - 1]
        if np.isscalar(entry):
            total -= float(entry)
        else:
            total -= float(joint.marginal(j) @ np.asarray(entry, dtype=float))
    return total


def oracle_best_subset(joint: ExplicitJoint, spec: RewardSpec, costs: CostModel,
                       mode=Mode.SMOOTHING):
    """Exhaustive maximization of the objective over feasible subsets.

    Ties are broken toward the lexicographically smallest index tuple.
    """
    costs.require_constant()
    n = joint.n
    if n > 12:
        raise EnumerationCapError(f"subset enumeration over {n} variables exceeds the cap")
    best_value = -math.inf
    best_set = ()
    for r in range(n + 1):
        for combo in itertools.combinations(range(1, n + 1), r):
            if costs.total_beta(combo) > costs.budget:
                continue
            value = oracle_total_reward(joint, spec, costs, combo, mode)
            if value > best_value or (value == best_value and combo < best_set):
                best_value = value
                best_set = combo
    return best_set, best_value


def oracle_best_plan(joint: ExplicitJoint, spec: RewardSpec, costs: CostModel,
                     mode=Mode.SMOOTHING) -> float:
    """Optimal value over sequential querying policies, by tree enumeration.

    Filtering restricts queries to strictly increasing indices and each
    reward's conditioning to past observations.  A query is admissible
    only if every reachable outcome keeps the remaining budget
    nonnegative.
    """
    mode = Mode.coerce(mode)
    n = joint.n
    if n > PLAN_TREE_CAP:
        raise EnumerationCapError(
            f"plan enumeration over {n} variables exceeds the cap of {PLAN_TREE_CAP}"
        )
    memo = {}

    def stop_value(ev: dict) -> float:
        total = 0.0
        observed = sorted(ev)
        for j in range(1, n + 1):
            total += _concrete_reward(joint, spec, j, ev, mode)
        for j in observed:
            entry = costs.penalties[j - 1]
            total -= float(entry) if np.isscalar(entry) else float(entry[ev[j]])
        return total

    def solve(ev: dict, k: int) -> float:
        key = (tuple(sorted(ev.items())), k)
        if key in memo:
            return memo[key]
        best = stop_value(ev)
        if mode is Mode.FILTERING:
            first = max(ev) + 1 if ev else 1
            candidates = range(first, n + 1)
        else:
            candidates = (j for j in range(1, n + 1) if j not in ev)
        for j in candidates:
            pj = joint.marginal(j, ev)
            value = 0.0
            feasible = True
            for x, p in enumerate(pj):
                if p <= 0.0:
                    continue
                rem = k - costs.beta(j, x)
                if rem < 0:
                    feasible = False
                    break
                value += p * solve({**ev, j: x}, rem)
            if feasible and value > best:
                best = value
        memo[key] = best
        return best

    return solve({}, costs.budget)


def _concrete_reward(joint: ExplicitJoint, spec: RewardSpec, j: int,
                     ev: dict, mode: Mode) -> float:
    """Reward of variable j under concrete evidence, enumeration path."""
    variant = spec.of(j)
    vals = _oracle_values(joint, spec, j)
    ev_view = ev if mode is Mode.SMOOTHING else {i: x for i, x in ev.items() if i <= j}
    if j in ev_view:
        x = ev_view[j]
        if isinstance(variant, Margin):
            return float(joint.max_marginal(j, {j: x})[x])
        if isinstance(variant, JointEntropy):
            return 0.0
        return point_reward(variant, x, joint.domains[j - 1], vals)
    if isinstance(variant, Margin):
        keep = _nearest_separators(sorted(ev_view), j, mode)
        vec = joint.max_marginal(j, {i: ev_view[i] for i in keep})
        return float(batch_reward(variant, vec[None, :], None)[0])
    if isinstance(variant, JointEntropy):
        # Literal chain-rule term: average H(X_j | x_1..x_{j-1}, ev) over
        # every assignment of the unobserved predecessors.
        free = [i for i in range(1, j) if i not in ev_view]
        z = joint.prob(ev_view) if ev_view else 1.0
        total = 0.0
        for combo in itertools.product(*(range(joint.domains[i - 1]) for i in free)):
            inner = dict(ev_view)
            inner.update(zip(free, combo))
            w = joint.prob(inner) / z
            if w <= 0.0:
                continue
            vec = joint.marginal(j, inner)
            total += w * float(batch_reward(_ENTROPY, vec[None, :], None)[0])
        return total
    vec = joint.marginal(j, ev_view)
    return float(batch_reward(variant, vec[None, :], vals)[0])


def greedy_subset(model: ChainModel, spec: RewardSpec, costs: CostModel,
                  mode=Mode.SMOOTHING):
    """Marginal-gain greedy baseline.

    Repeatedly adds the affordable variable with the largest objective
    increase until nothing affordable improves the objective.
    """
    mode = Mode.coerce(mode)
    costs.require_constant()
    chosen = []
    value = total_objective(model, spec, costs, chosen, mode)
    spent = 0
    while True:
        best_gain = 0.0
        best_j = None
        best_value = value
        for j in range(1, model.n + 1):
            if j in chosen or spent + costs.beta(j) > costs.budget:
                continue
            candidate = total_objective(model, spec, costs, chosen + [j], mode)
            gain = candidate - value
            if gain > best_gain + 1e-12:
                best_gain = gain
                best_j = j
                best_value = candidate
        if best_j is None:
            break
        chosen.append(best_j)
        spent += costs.beta(best_j)
        value = best_value
    return tuple(sorted(chosen)), value


def uniform_spacing(n: int, k: int):
    """Evenly spread k observation indices over 1..n.

    Positions are round(i*(n+1)/(k+1)) for i = 1..k with half-up rounding,
    clamped to the index range; collisions shift right to the next free
    index.
    """
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got k={k}, n={n}")
    taken = set()
    for i in range(1, k + 1):
        pos = int(math.floor(i * (n + 1) / (k + 1) + 0.5))
        pos = min(max(pos, 1), n)
        while pos in taken and pos < n:
            pos += 1
        taken.add(pos)
    return tuple(sorted(taken))


def label_vote_star(p_agree=0.75, reward_correct=1.0, reward_wrong=-3.0):
    """Three-variable star fixture: two noisy votes about a binary label.

    Variables 1 and 2 are conditionally independent copies that agree
    with the binary label (variable 3) with probability ``p_agree``.  The
    label carries an asymmetric-classification utility with an abstain
    action; the votes carry a zero-utility placeholder.  This instance is
    the standard witness that decision-theoretic value of information is
    not submodular.
    """
    p = p_agree
    table = np.zeros((2, 2, 2))
    for y in (0, 1):
        for x1 in (0, 1):
            for x2 in (0, 1):
                q1 = p if x1 == y else 1 - p
                q2 = p if x2 == y else 1 - p
                table[x1, x2, y] = 0.5 * q1 * q2
    label_utilities = np.array([
        [reward_correct, reward_wrong],   # declare label 0
        [reward_wrong, reward_correct],   # declare label 1
        [0.0, 0.0],                       # abstain
    ])
    silent = DecisionVoi(np.zeros((1, 2)))
    spec = RewardSpec((silent, silent, DecisionVoi(label_utilities,
                                                   ("declare-0", "declare-1", "abstain"))))
    costs = CostModel.uniform(3, budget=2)
    return ExplicitJoint(table), spec, costs
