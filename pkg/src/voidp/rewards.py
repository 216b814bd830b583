"""Local reward functionals and the decomposed total objective.

A local reward maps the conditional (max-)marginal of one variable to a
real number; the total objective is the sum of expected local rewards
minus penalties.  Expectations decompose along the chain: conditioning
on the nearest observed ancestor (and descendant, when smoothing) equals
conditioning on everything, so every expectation here runs over at most
two separator outcomes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .costs import CostModel
from .model import (ChainModel, Evidence, Marginal, MaxMarginal, Mode,
                    max_marginal, posterior_marginal)


@dataclass(frozen=True)
class ResidualEntropy:
    """Negative Shannon entropy of the conditional marginal, in bits."""


@dataclass(frozen=True)
class JointEntropy:
    """Chain-rule term of the negative joint entropy.

    The local reward of variable j is the negative entropy of X_j given
    its immediate predecessor and the nearest selected descendant; summed
    over the chain this reproduces -H(X_V | X_A) under smoothing.
    """


@dataclass(frozen=True)
class DecisionVoi:
    """Maximum expected utility over a finite action set.

    ``utilities[a, x]`` is the payoff of action a when the variable turns
    out to be in state x.
    """

    utilities: np.ndarray
    actions: tuple = ()

    def __post_init__(self):
        arr = np.asarray(self.utilities, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValueError("utilities must be a (num_actions, num_states) table")
        arr.setflags(write=False)
        object.__setattr__(self, "utilities", arr)
        if self.actions and len(self.actions) != arr.shape[0]:
            raise ValueError("one action label per utility row expected")

    def __eq__(self, other):
        if not isinstance(other, DecisionVoi):
            return NotImplemented
        return np.array_equal(self.utilities, other.utilities) and tuple(
            self.actions
        ) == tuple(other.actions)

    def __hash__(self):
        return hash((self.utilities.tobytes(), tuple(self.actions)))


@dataclass(frozen=True)
class Margin:
    """Gap between the two largest max-marginal entries."""


@dataclass(frozen=True)
class WeightedVariance:
    """Negative weighted variance of the state values."""

    weight: float = 1.0

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("variance weight must be nonnegative")


@dataclass(frozen=True)
class Hotspot:
    """Probability that the variable falls in a critical state set."""

    critical: frozenset

    def __post_init__(self):
        crit = frozenset(int(x) for x in self.critical)
        if not crit:
            raise ValueError("critical set must be nonempty")
        if any(x < 0 for x in crit):
            raise ValueError("critical states must be nonnegative")
        object.__setattr__(self, "critical", crit)


@dataclass(frozen=True)
class Expectation:
    """Expected state value of the variable."""


MARGINAL_VARIANTS = (ResidualEntropy, DecisionVoi, WeightedVariance, Hotspot, Expectation)
ALL_VARIANTS = MARGINAL_VARIANTS + (JointEntropy, Margin)


class RewardSpec:
    """Per-variable choice of local reward functional."""

    def __init__(self, variants):
        self.variants = tuple(variants)
        for v in self.variants:
            if not isinstance(v, ALL_VARIANTS):
                raise TypeError(f"unknown reward variant {v!r}")

    @classmethod
    def homogeneous(cls, variant, n: int) -> "RewardSpec":
        return cls((variant,) * n)

    @property
    def n(self) -> int:
        return len(self.variants)

    def of(self, j: int):
        return self.variants[j - 1]

    @property
    def needs_values(self) -> bool:
        return any(isinstance(v, (WeightedVariance, Expectation)) for v in self.variants)

    @property
    def uses_max_marginals(self) -> bool:
        return any(isinstance(v, Margin) for v in self.variants)

    def validate_for(self, model: ChainModel):
        if self.n != model.n:
            raise ValueError(f"reward spec covers {self.n} variables, model has {model.n}")
        for j in range(1, model.n + 1):
            v = self.of(j)
            d = model.domain(j)
            if isinstance(v, DecisionVoi) and v.utilities.shape[1] != d:
                raise ValueError(
                    f"utility table of variable {j} has {v.utilities.shape[1]} columns, domain is {d}"
                )
            if isinstance(v, Hotspot) and any(x >= d for x in v.critical):
                raise ValueError(f"critical state out of range for variable {j}")
            if isinstance(v, (WeightedVariance, Expectation)) and model.state_values is None:
                raise ValueError(
                    f"variable {j} reward requires state values on the model"
                )

    def __eq__(self, other):
        if not isinstance(other, RewardSpec):
            return NotImplemented
        return self.variants == other.variants


def _entropy_rows(p: np.ndarray) -> np.ndarray:
    """Row-wise sum of p*log2(p) with the 0 log 0 = 0 convention (<= 0)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return terms.sum(axis=-1)


def _margin_rows(v: np.ndarray) -> np.ndarray:
    """Row-wise gap between the largest and second largest entry.

    Single-state rows use zero as the runner-up.
    """
    if v.shape[-1] == 1:
        return v[..., 0]
    part = np.partition(v, v.shape[-1] - 2, axis=-1)
    return part[..., -1] - part[..., -2]


def batch_reward(variant, rows: np.ndarray, values=None) -> np.ndarray:
    """Vectorized local reward over rows of conditional marginals."""
    if isinstance(variant, (ResidualEntropy, JointEntropy)):
        return _entropy_rows(rows)
    if isinstance(variant, DecisionVoi):
        return (rows @ variant.utilities.T).max(axis=-1)
    if isinstance(variant, Hotspot):
        idx = sorted(variant.critical)
        return rows[..., idx].sum(axis=-1)
    if isinstance(variant, Expectation):
        return rows @ np.asarray(values, dtype=float)
    if isinstance(variant, WeightedVariance):
        vals = np.asarray(values, dtype=float)
        mean = rows @ vals
        second = rows @ (vals * vals)
        return -variant.weight * (second - mean * mean)
    if isinstance(variant, Margin):
        return _margin_rows(rows)
    raise TypeError(f"unknown reward variant {variant!r}")


def local_reward(variant, dist, values=None) -> float:
    """Apply one reward functional to a single conditional distribution.

    Margin consumes a :class:`MaxMarginal`; every other variant consumes
    a :class:`Marginal` (or a bare probability vector).
    """
    if isinstance(variant, Margin):
        if not isinstance(dist, MaxMarginal):
            raise TypeError("margin reward consumes max-marginals")
        return float(_margin_rows(dist.values))
    if isinstance(dist, MaxMarginal):
        raise TypeError(f"{type(variant).__name__} consumes ordinary marginals")
    probs = dist.probs if isinstance(dist, Marginal) else np.asarray(dist, dtype=float)
    if isinstance(variant, DecisionVoi) and variant.utilities.shape[1] != probs.shape[-1]:
        raise ValueError(
            f"utility table has {variant.utilities.shape[1]} columns, "
            f"distribution has {probs.shape[-1]} states"
        )
    if isinstance(variant, (Expectation, WeightedVariance)) and values is None:
        raise ValueError("numeric rewards require per-state values")
    return float(batch_reward(variant, probs[None, :], values)[0])


def point_reward(variant, x: int, d: int, values=None) -> float:
    """Local reward of the point mass at state x (margin excluded)."""
    if isinstance(variant, Margin):
        raise TypeError("margin point rewards require chain context")
    probs = np.zeros(d)
    probs[x] = 1.0
    return float(batch_reward(variant, probs[None, :], values)[0])


def _values_for(model, spec, j):
    v = spec.of(j)
    if isinstance(v, (Expectation, WeightedVariance)):
        return model.values_of(j)
    return None


def self_expected_reward(model: ChainModel, spec: RewardSpec, j: int) -> float:
    """Expected reward of variable j when j itself is observed.

    The expectation runs over the unconditional marginal of X_j.
    """
    variant = spec.of(j)
    prop = model._prop()
    if isinstance(variant, Margin):
        # Sum over states of the unconditional max-marginal at j.
        vec = prop.W[0][j][0] * prop.W[j][model.n + 1][:, 0]
        return float(vec.sum())
    if isinstance(variant, JointEntropy):
        return 0.0
    pj = prop.marg[j]
    d = model.domain(j)
    vals = _values_for(model, spec, j)
    rows = np.eye(d)
    return float(pj @ batch_reward(variant, rows, vals))


def expected_local_reward(model: ChainModel, spec: RewardSpec, j: int,
                          separators=(), mode=Mode.SMOOTHING) -> float:
    """Expected local reward of variable j given its selected separators.

    ``separators`` holds the nearest selected ancestor and, when
    smoothing, the nearest selected descendant (zero to two indices).
    The expectation runs over the separator outcomes.  Passing j itself
    as a separator yields the observed-variable reward.
    """
    mode = Mode.coerce(mode)
    seps = tuple(sorted(int(s) for s in separators))
    if any(not 1 <= s <= model.n for s in seps):
        raise ValueError(f"separator out of range in {seps}")
    if j in seps:
        return self_expected_reward(model, spec, j)
    a = max((s for s in seps if s < j), default=0)
    b = min((s for s in seps if s > j), default=model.n + 1)
    if len(seps) > 2 or (len(seps) == 2 and not (seps[0] < j < seps[1])):
        raise ValueError(f"separators {seps} do not bracket variable {j}")
    if mode is Mode.FILTERING:
        b = model.n + 1
    variant = spec.of(j)
    prop = model._prop()
    if isinstance(variant, JointEntropy):
        a = j - 1  # the chain-rule term always conditions on the predecessor
    if isinstance(variant, Margin):
        rows = prop.maxcond3(a, j, b)
    else:
        rows = prop.cond3(a, j, b)
    weights = prop.pair(a, b)
    vals = _values_for(model, spec, j)
    rewards = batch_reward(variant, rows.reshape(-1, rows.shape[-1]), vals)
    return float(weights.reshape(-1) @ rewards)


def _margin_separator_evidence(ev: dict, j: int, mode: Mode) -> dict:
    past = [i for i in ev if i < j]
    keep = {}
    if past:
        a = max(past)
        keep[a] = ev[a]
    if mode is Mode.SMOOTHING:
        future = [i for i in ev if i > j]
        if future:
            b = min(future)
            keep[b] = ev[b]
    return keep


def concrete_local_reward(model: ChainModel, spec: RewardSpec, j: int,
                          evidence: Evidence) -> float:
    """Local reward of variable j under a concrete partial assignment.

    This is the quantity a conditional plan accumulates along a branch;
    the evidence's mode tag controls which observations count.
    """
    variant = spec.of(j)
    mode = evidence.mode
    ev = evidence.as_dict() if mode is Mode.SMOOTHING else evidence.truncated(j).as_dict()
    vals = _values_for(model, spec, j)
    d = model.domain(j)
    if j in ev:
        x = ev[j]
        if isinstance(variant, Margin):
            mm = max_marginal(model, Evidence({j: x}, Mode.SMOOTHING), j)
            return float(mm.values[x])
        if isinstance(variant, JointEntropy):
            return 0.0
        return point_reward(variant, x, d, vals)
    if isinstance(variant, Margin):
        keep = _margin_separator_evidence(ev, j, mode)
        mm = max_marginal(model, Evidence(keep, Mode.SMOOTHING), j)
        return local_reward(variant, mm)
    if isinstance(variant, JointEntropy):
        ev_obj = Evidence(ev, Mode.SMOOTHING)
        if j == 1:
            return float(_entropy_rows(posterior_marginal(model, ev_obj, 1).probs))
        prev = posterior_marginal(model, ev_obj, j - 1).probs
        total = 0.0
        for x_prev, w in enumerate(prev):
            if w <= 0.0:
                continue
            inner = dict(ev)
            inner[j - 1] = x_prev
            cond = posterior_marginal(model, Evidence(inner, Mode.SMOOTHING), j).probs
            total += w * float(_entropy_rows(cond))
        return total
    ev_obj = Evidence(ev, Mode.SMOOTHING)
    return local_reward(variant, posterior_marginal(model, ev_obj, j), vals)


def segment_state_rewards(model: ChainModel, spec: RewardSpec, j: int,
                          a: int, b: int, mode=Mode.SMOOTHING) -> np.ndarray:
    """R_j(X_j | X_a = x_a, X_b = x_b) for all endpoint states at once.

    Returns a (d_a, d_b) array; a = 0 and b = n+1 denote the single-state
    chain endpoints.  Filtering ignores the right endpoint.
    """
    mode = Mode.coerce(mode)
    prop = model._prop()
    variant = spec.of(j)
    b_eff = model.n + 1 if mode is Mode.FILTERING else b
    d_a, d_b = prop.dims[a], prop.dims[b]
    vals = _values_for(model, spec, j)
    if isinstance(variant, Margin):
        rows = prop.maxcond3(a, j, b_eff)
        out = batch_reward(variant, rows.reshape(-1, rows.shape[-1]), None)
    elif isinstance(variant, JointEntropy):
        prev = j - 1
        cond_pred = (prop.cond3(a, prev, b_eff) if prev > a
                     else np.eye(d_a)[:, None, :].repeat(prop.dims[b_eff], axis=1))
        h_rows = _entropy_rows(prop.cond3(prev, j, b_eff))  # (d_prev, d_beff)
        out = np.einsum("abp,pb->ab", cond_pred, h_rows)
    else:
        rows = prop.cond3(a, j, b_eff)
        out = batch_reward(variant, rows.reshape(-1, rows.shape[-1]), vals)
    out = out.reshape(d_a, prop.dims[b_eff])
    if b_eff != b:
        out = np.repeat(out, d_b, axis=1) if d_b != out.shape[1] else out
    return out


def self_state_rewards(model: ChainModel, spec: RewardSpec, j: int) -> np.ndarray:
    """R_j(X_j | X_j = x) for every state x of variable j."""
    variant = spec.of(j)
    d = model.domain(j)
    if isinstance(variant, Margin):
        prop = model._prop()
        top = prop.W[0][j][0] * prop.W[j][model.n + 1][:, 0]
        pj = prop.marg[j]
        return np.divide(top, pj, out=np.zeros_like(top), where=pj > 0)
    if isinstance(variant, JointEntropy):
        return np.zeros(d)
    vals = _values_for(model, spec, j)
    return batch_reward(variant, np.eye(d), vals)


def expected_penalty(model: ChainModel, costs: CostModel, j: int) -> float:
    """Penalty of observing j, averaged over its states when state-dependent."""
    entry = costs.penalties[j - 1]
    if np.isscalar(entry):
        return float(entry)
    pj = model._prop().marg[j]
    return float(pj @ np.asarray(entry, dtype=float))


def total_objective(model: ChainModel, spec: RewardSpec, costs: CostModel,
                    selection, mode=Mode.SMOOTHING) -> float:
    """Decomposed objective L(A): expected rewards minus penalties.

    Pure evaluation; the budget is not enforced here.
    """
    mode = Mode.coerce(mode)
    spec.validate_for(model)
    chosen = sorted(set(int(j) for j in selection))
    if any(not 1 <= j <= model.n for j in chosen):
        raise ValueError(f"selection {chosen} out of range 1..{model.n}")
    anchors = [0] + chosen + [model.n + 1]
    total = 0.0
    for left, right in zip(anchors, anchors[1:]):
        for j in range(left + 1, right):
            seps = []
            if left >= 1:
                seps.append(left)
            if mode is Mode.SMOOTHING and right <= model.n:
                seps.append(right)
            total += expected_local_reward(model, spec, j, tuple(seps), mode)
    for j in chosen:
        total += self_expected_reward(model, spec, j)
        total -= expected_penalty(model, costs, j)
    return total
