"""Approximate scheduling of multiple correlated sensor chains.

Joint scheduling of correlated chains is intractable, so the objective is
replaced by a lower bound: each reward conditions only on every sensor's
most recent observation.  Under that bound each sensor's schedule can be
optimized exactly by the single-chain subset solver with cross-chain base
cases, and cycling over sensors (coordinate ascent) monotonically
improves the bound until it converges.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .costs import CostModel
from .model import ChainModel, Mode, _fold_weights, _forward_loglik, _propagate_point, sample
from .rewards import (MARGINAL_VARIANTS, RewardSpec, batch_reward)
from .subset import SubsetResult, select_subset

MARGINAL_ATOL = 1e-6


class ProductCoupling:
    """Explicit joint process over the per-time cross-sensor state.

    The coupled state at time t is the tuple of all sensor states,
    flattened in C order; the process over flattened states is itself a
    chain, which keeps exact inference affordable when the product of
    domains is small.
    """

    def __init__(self, chain: ChainModel, dims_per_time):
        self.chain = chain
        self.dims = tuple(tuple(int(d) for d in dims) for dims in dims_per_time)
        if chain.n != len(self.dims):
            raise ValueError("one dimension tuple per time step expected")
        for t, dims in enumerate(self.dims, start=1):
            if int(np.prod(dims)) != chain.domain(t):
                raise ValueError(
                    f"coupling domain at time {t} is {chain.domain(t)}, "
                    f"sensor dimensions give {int(np.prod(dims))}"
                )

    @property
    def num_sensors(self) -> int:
        return len(self.dims[0])

    @property
    def horizon(self) -> int:
        return self.chain.n

    @classmethod
    def independent(cls, sensors) -> "ProductCoupling":
        """Kronecker coupling of independent sensor chains."""
        horizon = sensors[0].n
        if any(m.n != horizon for m in sensors):
            raise ValueError("all sensor chains must share the horizon")
        prior = sensors[0].prior
        for m in sensors[1:]:
            prior = np.multiply.outer(prior, m.prior).reshape(-1)
        transitions = []
        for t in range(horizon - 1):
            step = sensors[0].transitions[t]
            for m in sensors[1:]:
                step = np.kron(step, m.transitions[t])
            transitions.append(step)
        dims = [tuple(m.domain(t) for m in sensors) for t in range(1, horizon + 1)]
        return cls(ChainModel(prior, transitions), dims)

    def indicator(self, t: int, sensor: int, state: int) -> np.ndarray:
        """Weight vector over flattened states pinning one component."""
        dims = self.dims[t - 1]
        grid = np.zeros(dims)
        index = [slice(None)] * len(dims)
        index[sensor - 1] = state
        grid[tuple(index)] = 1.0
        return grid.reshape(-1)

    def component_dist(self, flat_dist: np.ndarray, t: int, sensor: int) -> np.ndarray:
        dims = self.dims[t - 1]
        grid = flat_dist.reshape(dims)
        axes = tuple(ax for ax in range(len(dims)) if ax != sensor - 1)
        return grid.sum(axis=axes) if axes else grid

    def component_marginal(self, t: int, sensor: int) -> np.ndarray:
        flat = _propagate_point(self.chain, None, t, None)
        return self.component_dist(flat, t, sensor)

    def sensor_views(self) -> list:
        """Per-sensor chains induced by the coupling.

        Priors and transitions come from the coupling's pairwise
        component joints, so per-time marginals agree exactly.
        """
        views = []
        horizon = self.horizon
        flats = [_propagate_point(self.chain, None, t, None) for t in range(1, horizon + 1)]
        for s in range(1, self.num_sensors + 1):
            prior = self.component_dist(flats[0], 1, s)
            transitions = []
            for t in range(1, horizon):
                d_now = self.dims[t - 1][s - 1]
                d_next = self.dims[t][s - 1]
                joint = np.zeros((d_now, d_next))
                step = self.chain.transitions[t - 1]
                pair = flats[t - 1][:, None] * step
                for flat_now in range(pair.shape[0]):
                    x_now = np.unravel_index(flat_now, self.dims[t - 1])[s - 1]
                    row = pair[flat_now].reshape(self.dims[t])
                    axes = tuple(ax for ax in range(len(self.dims[t])) if ax != s - 1)
                    joint[x_now] += row.sum(axis=axes) if axes else row
                sums = joint.sum(axis=1, keepdims=True)
                uniform = np.full_like(joint, 1.0 / d_next)
                transitions.append(np.divide(joint, sums, out=uniform, where=sums > 0))
            views.append(ChainModel(prior, transitions))
        return views

    def sample(self, rng, size: int) -> np.ndarray:
        """Trajectories of shape (size, horizon, num_sensors)."""
        flat = sample(self.chain, rng, size=size)
        out = np.empty((size, self.horizon, self.num_sensors), dtype=np.int64)
        for t in range(1, self.horizon + 1):
            coords = np.unravel_index(flat[:, t - 1], self.dims[t - 1])
            for s in range(self.num_sensors):
                out[:, t - 1, s] = coords[s]
        return out


class SamplerCoupling:
    """Generative coupling: a callable producing full trajectories.

    Exact inference is unavailable through this interface; expectations
    fall back to the Monte-Carlo estimator.
    """

    def __init__(self, fn, dims_per_time):
        self.fn = fn
        self.dims = tuple(tuple(int(d) for d in dims) for dims in dims_per_time)

    @property
    def num_sensors(self) -> int:
        return len(self.dims[0])

    @property
    def horizon(self) -> int:
        return len(self.dims)

    def sample(self, rng, size: int) -> np.ndarray:
        out = np.asarray(self.fn(rng, size), dtype=np.int64)
        if out.shape != (size, self.horizon, self.num_sensors):
            raise ValueError(f"sampler returned shape {out.shape}")
        return out


class MultiChainModel:
    """Per-sensor chains, their reward specs, and the cross-sensor coupling."""

    def __init__(self, sensors, rewards, coupling):
        self.sensors = tuple(sensors)
        self.rewards = tuple(rewards)
        self.coupling = coupling
        horizon = self.sensors[0].n
        if any(m.n != horizon for m in self.sensors):
            raise ValueError("all sensor chains must share the horizon")
        if len(self.rewards) != len(self.sensors):
            raise ValueError("one reward spec per sensor expected")
        for s, (m, spec) in enumerate(zip(self.sensors, self.rewards), start=1):
            spec.validate_for(m)
            for t in range(1, horizon + 1):
                if not isinstance(spec.of(t), MARGINAL_VARIANTS):
                    raise TypeError(
                        "cross-chain rewards must be functionals of conditional "
                        f"marginals (sensor {s}, time {t})"
                    )
        if coupling.num_sensors != len(self.sensors) or coupling.horizon != horizon:
            raise ValueError("coupling shape does not match the sensor chains")

    @property
    def num_sensors(self) -> int:
        return len(self.sensors)

    @property
    def horizon(self) -> int:
        return self.sensors[0].n

    @property
    def exact_capable(self) -> bool:
        return isinstance(self.coupling, ProductCoupling)

    def validate_marginals(self, atol=MARGINAL_ATOL):
        """Check that coupling marginals agree with the sensor chains."""
        if not self.exact_capable:
            return
        for s, m in enumerate(self.sensors, start=1):
            for t in range(1, self.horizon + 1):
                own = _propagate_point(m, None, t, None)
                via = self.coupling.component_marginal(t, s)
                if np.max(np.abs(own - via)) > atol:
                    raise ValueError(
                        f"coupling marginal of sensor {s} at time {t} deviates "
                        f"by {np.max(np.abs(own - via)):.3g}"
                    )


def flatten_joint(multi: MultiChainModel):
    """Dense joint over all (sensor, time) variables, plus an index map.

    Variable order interleaves sensors within each time step; the
    returned function maps (sensor, time) to a 1-based variable index.
    Only available for explicit couplings and small horizons.
    """
    from .oracles import ExplicitJoint, joint_from_chain

    if not multi.exact_capable:
        raise ValueError("flattening requires an explicit coupling")
    coupling = multi.coupling
    table = joint_from_chain(coupling.chain).table
    shape = tuple(d for dims in coupling.dims for d in dims)
    joint = ExplicitJoint(table.reshape(shape))

    def index_of(s: int, t: int) -> int:
        return (t - 1) * multi.num_sensors + s

    return joint, index_of


def recent_observation_filter(pairs, t: int) -> frozenset:
    """Keep, per sensor, only the latest observation at time <= t."""
    latest = {}
    for s, tt in pairs:
        if tt > t:
            continue
        if s not in latest or tt > latest[s]:
            latest[s] = tt
    return frozenset((s, tt) for s, tt in latest.items())


def _reward_of_dist(multi: MultiChainModel, s: int, j: int, dist: np.ndarray) -> float:
    variant = multi.rewards[s - 1].of(j)
    values = None
    if multi.sensors[s - 1].state_values is not None:
        values = multi.sensors[s - 1].values_of(j)
    return float(batch_reward(variant, dist[None, :], values)[0])


def _exact_expected_reward(multi, s, j, ev_pairs) -> float:
    coupling = multi.coupling
    chain = coupling.chain
    pairs = sorted(ev_pairs, key=lambda p: (p[1], p[0]))
    domains = [multi.sensors[ps - 1].domain(pt) for ps, pt in pairs]
    total = 0.0
    for combo in itertools.product(*(range(d) for d in domains)):
        weights = [np.ones(chain.domain(t)) for t in range(1, chain.n + 1)]
        for (ps, pt), x in zip(pairs, combo):
            weights[pt - 1] = weights[pt - 1] * coupling.indicator(pt, ps, x)
        loglik = _forward_loglik(chain, weights)
        if loglik == -np.inf:
            continue
        p = float(np.exp(loglik))
        folded = _fold_weights(chain, weights)
        flat = _propagate_point(folded, None, j, None)
        dist = coupling.component_dist(flat, j, s)
        total += p * _reward_of_dist(multi, s, j, dist)
    return total


def _sampled_expected_reward(multi, s, j, ev_pairs, sample_count, rng) -> float:
    if rng is None:
        raise ValueError("sampled cross-chain rewards require a seeded random source")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    trajs = multi.coupling.sample(rng, int(sample_count))
    pairs = sorted(ev_pairs, key=lambda p: (p[1], p[0]))
    target = trajs[:, j - 1, s - 1]
    d = multi.sensors[s - 1].domain(j)
    if not pairs:
        dist = np.bincount(target, minlength=d) / len(target)
        return _reward_of_dist(multi, s, j, dist)
    ev_cols = np.stack([trajs[:, pt - 1, ps - 1] for ps, pt in pairs], axis=1)
    _, inverse, counts = np.unique(ev_cols, axis=0, return_inverse=True, return_counts=True)
    total = 0.0
    for g, count in enumerate(counts):
        members = target[inverse == g]
        dist = np.bincount(members, minlength=d) / count
        total += (count / len(target)) * _reward_of_dist(multi, s, j, dist)
    return total


def cross_chain_expected_reward(multi: MultiChainModel, s: int, j: int,
                                own_separator=None, schedules=None,
                                sample_count=None, rng=None) -> float:
    """Expected reward of X_{s,j} given recent cross-sensor observations.

    Conditioning uses the sensor's own separator plus, for every other
    sensor, its most recent scheduled observation at time <= j.  Exact
    when the coupling is an explicit product chain and ``sample_count``
    is None; Monte-Carlo otherwise.
    """
    pairs = set()
    if own_separator is not None and own_separator >= 1:
        pairs.add((s, int(own_separator)))
    if schedules:
        for s2, times in _schedule_items(schedules):
            if s2 == s:
                continue
            for t in times:
                pairs.add((s2, int(t)))
    evidence = recent_observation_filter(pairs, j)
    if sample_count is None:
        if not multi.exact_capable:
            raise ValueError("exact mode requires an explicit coupling; pass sample_count")
        return _exact_expected_reward(multi, s, j, evidence)
    return _sampled_expected_reward(multi, s, j, evidence, sample_count, rng)


def _schedule_items(schedules):
    if isinstance(schedules, dict):
        return [(int(s), tuple(v)) for s, v in schedules.items()]
    return [(s, tuple(v)) for s, v in enumerate(schedules, start=1)]


@dataclass(frozen=True)
class MultiSchedule:
    """Per-sensor observation times plus the optimization trace."""

    schedules: tuple
    objective: float
    trace: tuple
    deltas: tuple

    def schedule_of(self, s: int) -> tuple:
        return self.schedules[s - 1]


class _CrossSegmentRewards:
    """Subset-solver reward provider with cross-chain conditioning.

    Rewards of every sensor at every interior time are included, because
    the optimized sensor's observations also sharpen the other sensors'
    posteriors; the optimized sensor's own evidence is the segment's left
    anchor (filtering).
    """

    def __init__(self, multi, sensor, schedules, sample_count=None, rng=None):
        self.multi = multi
        self.sensor = sensor
        self.others = {s: tuple(v) for s, v in _schedule_items(schedules) if s != sensor}
        self.sample_count = sample_count
        self.rng = rng
        self.evals = 0
        self._cache = {}

    def _time_reward(self, t: int, anchor) -> float:
        key = (t, anchor)
        if key not in self._cache:
            total = 0.0
            for q in range(1, self.multi.num_sensors + 1):
                if q == self.sensor:
                    own = anchor
                    sched = self.others
                else:
                    own = max((tt for tt in self.others.get(q, ()) if tt <= t),
                              default=None)
                    sched = dict(self.others)
                    if anchor is not None:
                        sched[self.sensor] = (anchor,)
                total += cross_chain_expected_reward(
                    self.multi, q, t, own_separator=own, schedules=sched,
                    sample_count=self.sample_count, rng=self.rng)
            self._cache[key] = total
        return self._cache[key]

    def interior_sum(self, a: int, b: int) -> float:
        anchor = a if a >= 1 else None
        total = 0.0
        for t in range(a + 1, b):
            total += self._time_reward(t, anchor)
            self.evals += 1
        return total

    def self_reward(self, j: int) -> float:
        self.evals += 1
        return self._time_reward(j, j)


def lower_bound_objective(multi: MultiChainModel, schedules, costs: CostModel,
                          sample_count=None, rng=None) -> float:
    """Sum of expected rewards under most-recent-observation conditioning."""
    total = 0.0
    items = dict(_schedule_items(schedules))
    for s in range(1, multi.num_sensors + 1):
        own_times = items.get(s, ())
        for t in range(1, multi.horizon + 1):
            own = max((tt for tt in own_times if tt <= t), default=None)
            total += cross_chain_expected_reward(
                multi, s, t, own_separator=own, schedules=items,
                sample_count=sample_count, rng=rng)
        for t in own_times:
            total -= costs.penalty(t)
    return total


def schedule_multi(multi: MultiChainModel, costs: CostModel, max_iters=20,
                   delta_tol=1e-6, init="independent", rng=None,
                   sample_count=None) -> MultiSchedule:
    """Coordinate-ascent schedule over sensors (filtering setting).

    Each round re-solves every sensor's single-chain subset problem with
    cross-chain base cases, holding the other schedules fixed.  With an
    explicit coupling and exact expectations the objective trace is
    monotone nondecreasing.
    """
    costs.require_constant()
    ell = multi.num_sensors
    if costs.n != multi.horizon:
        raise ValueError("cost model must cover one entry per time step")
    if ell == 1:
        result = select_subset(multi.sensors[0], multi.rewards[0], costs, Mode.FILTERING)
        return MultiSchedule((result.selected,), result.value, (result.value,), ())
    if init == "independent":
        schedules = [
            select_subset(multi.sensors[s - 1], multi.rewards[s - 1], costs,
                          Mode.FILTERING).selected
            for s in range(1, ell + 1)
        ]
    elif init == "random":
        if rng is None:
            raise ValueError("random initialization requires a seeded random source")
        gen = np.random.default_rng(rng) if isinstance(rng, (int, np.integer)) else rng
        schedules = []
        for s in range(1, ell + 1):
            times = []
            spent = 0
            for t in gen.permutation(np.arange(1, multi.horizon + 1)):
                cost = costs.beta(int(t))
                if spent + cost <= costs.budget and gen.random() < 0.5:
                    times.append(int(t))
                    spent += cost
            schedules.append(tuple(sorted(times)))
    else:
        schedules = [tuple(sorted(int(t) for t in times)) for times in init]
    objective = lower_bound_objective(multi, schedules, costs,
                                      sample_count=sample_count, rng=rng)
    trace = [objective]
    deltas = []
    for _ in range(max_iters):
        for s in range(1, ell + 1):
            provider = _CrossSegmentRewards(multi, s, schedules,
                                            sample_count=sample_count, rng=rng)
            result = select_subset(multi.sensors[s - 1], multi.rewards[s - 1],
                                   costs, Mode.FILTERING, _provider=provider)
            schedules[s - 1] = result.selected
        objective = lower_bound_objective(multi, schedules, costs,
                                          sample_count=sample_count, rng=rng)
        deltas.append(objective - trace[-1])
        trace.append(objective)
        if abs(deltas[-1]) < delta_tol:
            break
    return MultiSchedule(tuple(schedules), trace[-1], tuple(trace), tuple(deltas))
