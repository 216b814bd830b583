"""Optimal conditional observation plans and their execution.

The planner fills value tables ``J[a, b](x_a, x_b; k)`` for every
sub-chain and budget: the best expected reward for the variables strictly
between a and b after observing the endpoint states, spending at most k.
Next-query choices are kept in ``pi`` and, for smoothing, the chosen
left/right budget split in ``sigma``; together they encode the whole
plan in polynomial space.  Filtering drops the right endpoint axis and
the split search (looking back in time is impossible), which is what
makes it cheaper.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .costs import CostModel
from .errors import VoidpError
from .model import ChainModel, Evidence, Mode, sample
from .rewards import (RewardSpec, concrete_local_reward, segment_state_rewards,
                      self_state_rewards)

NEG_INF = -np.inf


@dataclass
class PlanTables:
    """Compact encoding of an optimal conditional plan."""

    model: ChainModel
    spec: RewardSpec
    costs: CostModel
    mode: Mode
    budget: int
    values: dict
    pi: dict
    sigma: dict
    eval_count: int

    @property
    def n(self) -> int:
        return self.model.n

    @property
    def root_value(self) -> float:
        if self.mode is Mode.SMOOTHING:
            return float(self.values[(0, self.n + 1)][0, 0, self.budget])
        return float(self.values[(0, self.n + 1)][0, self.budget])

    def next_query(self, a, x_a, b, x_b, k) -> int:
        """The pi lookup: next variable to query inside (a, b), or -1."""
        if k <= 0:
            return -1
        if self.mode is Mode.SMOOTHING:
            return int(self.pi[(a, b)][x_a, x_b, k])
        return int(self.pi[(a, b)][x_a, k])

    def budget_split(self, a, x_a, b, x_b, j, x_j, k) -> int:
        """Budget granted to the left sub-chain after observing X_j = x_j."""
        if self.mode is Mode.FILTERING:
            return 0
        return int(self.sigma[(a, b)][x_a, x_b, x_j, k])


def _segment_pairs(n):
    for a in range(n + 1):
        for b in range(a + 1, n + 2):
            yield a, b


def build_plan(model: ChainModel, spec: RewardSpec, costs: CostModel,
               mode=Mode.SMOOTHING) -> PlanTables:
    """Compute an optimal conditional plan for the given budget.

    State-dependent penalties and costs are supported; a query whose
    cost would overrun the remaining budget in any reachable outcome is
    never chosen.  Ties go to the smallest query index ("stop" preferred)
    and to the smallest left budget among equal splits.
    """
    mode = Mode.coerce(mode)
    spec.validate_for(model)
    n = model.n
    if costs.n != n:
        raise ValueError(f"cost model covers {costs.n} variables, model has {n}")
    builder = _SmoothingBuilder if mode is Mode.SMOOTHING else _FilteringBuilder
    return builder(model, spec, costs, mode).run()


class _BuilderBase:
    def __init__(self, model, spec, costs, mode):
        self.model = model
        self.spec = spec
        self.costs = costs
        self.mode = mode
        self.n = model.n
        self.budget = costs.budget
        self.dims = (1,) + model.domains + (1,)
        self.evals = 0
        self.self_net = [None] * (self.n + 1)
        for j in range(1, self.n + 1):
            d = model.domain(j)
            rewards = self_state_rewards(model, spec, j)
            self.evals += d
            self.self_net[j] = rewards - costs.penalty_vector(j, d)

    def segment_rewards(self, j, a, b):
        out = segment_state_rewards(self.model, self.spec, j, a, b, self.mode)
        self.evals += out.size
        return out


class _SmoothingBuilder(_BuilderBase):
    def run(self) -> PlanTables:
        n, B = self.n, self.budget
        dims = self.dims
        dmax = max(dims)
        prop = self.model._prop()
        values, pi, sigma = {}, {}, {}
        for a, b in _segment_pairs(n):
            da, db = dims[a], dims[b]
            base = np.zeros((da, db))
            for j in range(a + 1, b):
                base += self.segment_rewards(j, a, b)
            arr = np.zeros((da, db, B + 1))
            arr[:, :, 0] = base
            values[(a, b)] = arr
            pi[(a, b)] = np.full((da, db, B + 1), -1, dtype=int)
            sigma[(a, b)] = np.zeros((da, db, dmax, B + 1), dtype=int)
        for k in range(1, B + 1):
            for a, b in _segment_pairs(n):
                da, db = dims[a], dims[b]
                best = values[(a, b)][:, :, 0].copy()
                pick = np.full((da, db), -1, dtype=int)
                sig_best = np.zeros((da, db, dmax), dtype=int)
                for j in range(a + 1, b):
                    dj = dims[j]
                    cond = prop.cond3(a, j, b)
                    beta = self.costs.beta_vector(j, dj)
                    sig_j = np.zeros((da, db, dmax), dtype=int)
                    if np.all(beta == beta[0]):
                        # Uniform cost: one budget residue for every outcome,
                        # so the split search vectorizes over x_j.
                        rem = k - int(beta[0])
                        if rem < 0:
                            continue
                        left = values[(a, j)][:, :, :rem + 1]
                        right = values[(j, b)][:, :, rem::-1]
                        tot = left[:, None, :, :] + np.transpose(right, (1, 0, 2))[None, :, :, :]
                        split = tot.argmax(axis=3)
                        cont = np.take_along_axis(tot, split[..., None], axis=3)[..., 0]
                        cand = (cond * (cont + self.self_net[j][None, None, :])).sum(axis=2)
                        sig_j[:, :, :dj] = split
                    else:
                        expect = np.zeros((da, db))
                        infeasible = np.zeros((da, db), dtype=bool)
                        for x in range(dj):
                            rem = k - int(beta[x])
                            px = cond[:, :, x]
                            if rem < 0:
                                infeasible |= px > 0
                                continue
                            left = values[(a, j)][:, x, :rem + 1]
                            right = values[(j, b)][x, :, rem::-1]
                            tot = left[:, None, :] + right[None, :, :]
                            split = tot.argmax(axis=2)
                            cont = np.take_along_axis(tot, split[:, :, None], axis=2)[:, :, 0]
                            expect += px * (self.self_net[j][x] + cont)
                            sig_j[:, :, x] = split
                        cand = np.where(infeasible, NEG_INF, expect)
                    better = cand > best
                    if np.any(better):
                        best = np.where(better, cand, best)
                        pick = np.where(better, j, pick)
                        sig_best = np.where(better[:, :, None], sig_j, sig_best)
                values[(a, b)][:, :, k] = best
                pi[(a, b)][:, :, k] = pick
                sigma[(a, b)][:, :, :, k] = sig_best
        return PlanTables(self.model, self.spec, self.costs, self.mode, B,
                          values, pi, sigma, self.evals)


class _FilteringBuilder(_BuilderBase):
    def run(self) -> PlanTables:
        n, B = self.n, self.budget
        dims = self.dims
        prop = self.model._prop()
        values, pi = {}, {}
        for a, b in _segment_pairs(n):
            da = dims[a]
            base = np.zeros(da)
            for j in range(a + 1, b):
                base += self.segment_rewards(j, a, b)[:, 0]
            arr = np.zeros((da, B + 1))
            arr[:, 0] = base
            values[(a, b)] = arr
            pi[(a, b)] = np.full((da, B + 1), -1, dtype=int)
        for k in range(1, B + 1):
            for a, b in _segment_pairs(n):
                da = dims[a]
                best = values[(a, b)][:, 0].copy()
                pick = np.full(da, -1, dtype=int)
                for j in range(a + 1, b):
                    dj = dims[j]
                    cond = prop.cond3(a, j, n + 1)[:, 0, :]
                    beta = self.costs.beta_vector(j, dj)
                    if np.all(beta == beta[0]):
                        rem = k - int(beta[0])
                        if rem < 0:
                            continue
                        cand = values[(a, j)][:, 0] + cond @ (
                            self.self_net[j] + values[(j, b)][:, rem])
                    else:
                        expect = values[(a, j)][:, 0].copy()
                        infeasible = np.zeros(da, dtype=bool)
                        for x in range(dj):
                            rem = k - int(beta[x])
                            px = cond[:, x]
                            if rem < 0:
                                infeasible |= px > 0
                                continue
                            expect += px * (self.self_net[j][x] + values[(j, b)][x, rem])
                        cand = np.where(infeasible, NEG_INF, expect)
                    better = cand > best
                    if np.any(better):
                        best = np.where(better, cand, best)
                        pick = np.where(better, j, pick)
                values[(a, b)][:, k] = best
                pi[(a, b)][:, k] = pick
        return PlanTables(self.model, self.spec, self.costs, self.mode, B,
                          values, pi, {}, self.evals)


def plan_value(tables: PlanTables, model: ChainModel = None) -> float:
    """Exact expected value of the encoded plan, recomputed from the model.

    Stop values are re-derived from the model rather than read back from
    the tables, so agreement with the root entry is a real consistency
    check.
    """
    model = tables.model if model is None else model
    if model.domains != tables.model.domains:
        raise ValueError("model and plan tables disagree on variable domains")
    prop = model._prop()
    mode = tables.mode
    stop_cache = {}

    def stop_value(a, b):
        if (a, b) not in stop_cache:
            dims = (1,) + model.domains + (1,)
            total = np.zeros((dims[a], dims[b]))
            for j in range(a + 1, b):
                total += segment_state_rewards(model, tables.spec, j, a, b, mode)
            stop_cache[(a, b)] = total
        return stop_cache[(a, b)]

    def value(a, x_a, b, x_b, k):
        j = tables.next_query(a, x_a, b, x_b, k)
        if j < 0:
            return float(stop_value(a, b)[x_a, x_b])
        cond = prop.cond3(a, j, b)[x_a, x_b, :]
        self_net = self_state_rewards(model, tables.spec, j) - \
            tables.costs.penalty_vector(j, model.domain(j))
        total = 0.0
        for x, px in enumerate(cond):
            if px <= 0.0:
                continue
            left_budget = tables.budget_split(a, x_a, b, x_b, j, x, k)
            rem = k - left_budget - tables.costs.beta(j, x)
            total += px * (self_net[x] + value(a, x_a, j, x, left_budget)
                           + value(j, x, b, x_b, rem))
        return total

    return value(0, 0, model.n + 1, 0, tables.budget)


class RecordedSource:
    """Observation source backed by a full assignment or an answer map."""

    def __init__(self, assignment):
        if isinstance(assignment, dict):
            self.answers = {int(j): int(x) for j, x in assignment.items()}
        else:
            self.answers = {j: int(x) for j, x in enumerate(assignment, start=1)}

    def respond(self, index: int) -> int:
        if index not in self.answers:
            raise KeyError(f"recorded source has no answer for variable {index}")
        return self.answers[index]


class SampledSource:
    """Draws one world per episode from the model and answers from it."""

    def __init__(self, model: ChainModel, rng):
        self.model = model
        self.rng = np.random.default_rng(rng) if isinstance(rng, (int, np.integer)) else rng
        self.world = None

    def reset(self):
        self.world = sample(self.model, self.rng)

    def respond(self, index: int) -> int:
        if self.world is None:
            self.reset()
        return int(self.world[index - 1])


class CallbackSource:
    """Adapts a plain callable ``index -> state`` to the source protocol."""

    def __init__(self, fn):
        self.fn = fn

    def respond(self, index: int) -> int:
        return int(self.fn(index))


class PlanExecution:
    """Step-by-step walk of a plan, mirroring the recursive executor.

    Frames of (a, x_a, b, x_b, k) are kept on a stack; answering a query
    splits the current frame into its left and right sub-chains, left
    first.  The same walker backs in-process execution and the session
    service, so both produce identical query sequences.
    """

    def __init__(self, tables: PlanTables):
        self.tables = tables
        self.evidence = {}
        self.order = []
        self.spent = 0
        self._stack = [(0, 0, tables.n + 1, 0, tables.budget)]
        self._advance()

    def _advance(self):
        while self._stack:
            a, x_a, b, x_b, k = self._stack[-1]
            if self.tables.next_query(a, x_a, b, x_b, k) < 0:
                self._stack.pop()
            else:
                return

    @property
    def done(self) -> bool:
        return not self._stack

    @property
    def next_index(self):
        """Index of the pending query, or None when the plan is finished."""
        if self.done:
            return None
        a, x_a, b, x_b, k = self._stack[-1]
        return self.tables.next_query(a, x_a, b, x_b, k)

    @property
    def remaining_budget(self) -> int:
        return self.tables.budget - self.spent

    def answer(self, index: int, state: int):
        if self.done:
            raise VoidpError("plan already finished")
        a, x_a, b, x_b, k = self._stack[-1]
        j = self.tables.next_query(a, x_a, b, x_b, k)
        if index != j:
            raise ValueError(f"expected an answer for variable {j}, got {index}")
        if index in self.evidence:
            raise VoidpError(f"variable {index} was already observed")
        d = self.tables.model.domain(index)
        if not 0 <= int(state) < d:
            raise ValueError(f"state {state} out of range for variable {index}")
        state = int(state)
        self._stack.pop()
        cost = self.tables.costs.beta(index, state)
        left_budget = self.tables.budget_split(a, x_a, b, x_b, j, state, k)
        right_budget = k - left_budget - cost
        if right_budget < 0 or left_budget < 0:
            raise VoidpError(
                f"observed state {state} of variable {index} overruns the plan budget"
            )
        self.evidence[index] = state
        self.order.append(index)
        self.spent += cost
        self._stack.append((j, state, b, x_b, right_budget))
        self._stack.append((a, x_a, j, state, left_budget))
        self._advance()


@dataclass(frozen=True)
class EpisodeRecord:
    """One execution of a plan against an observation source."""

    queried: tuple            # (index, state) pairs in query order
    spent_budget: int
    realized_reward: float
    expected_value: float     # root value of the executed plan


def execute_plan(tables: PlanTables, source) -> EpisodeRecord:
    """Run the plan to completion, querying the source for each answer."""
    walk = PlanExecution(tables)
    if hasattr(source, "reset"):
        source.reset()
    while not walk.done:
        j = walk.next_index
        walk.answer(j, source.respond(j))
    return EpisodeRecord(
        queried=tuple((j, walk.evidence[j]) for j in walk.order),
        spent_budget=walk.spent,
        realized_reward=realized_reward(tables, walk.evidence),
        expected_value=tables.root_value,
    )


def realized_reward(tables: PlanTables, evidence_map: dict) -> float:
    """Conditional objective of the actually observed values."""
    model, spec, costs = tables.model, tables.spec, tables.costs
    ev = Evidence(dict(evidence_map), tables.mode)
    total = 0.0
    for j in range(1, model.n + 1):
        total += concrete_local_reward(model, spec, j, ev)
    for j, x in evidence_map.items():
        total -= costs.penalty(j, x)
    return total
