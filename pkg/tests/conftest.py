import math

import numpy as np
import pytest

from voidp import (ChainModel, CostModel, DecisionVoi, Expectation, Hotspot,
                   JointEntropy, Margin, ResidualEntropy, RewardSpec,
                   WeightedVariance)

REWARD_KINDS = ("entropy", "joint_entropy", "voi", "margin", "variance",
                "hotspot", "expectation")


def binary_entropy(p: float) -> float:
    """H_b(p) in bits, independent arithmetic for expected test values."""
    if p in (0.0, 1.0):
        return 0.0
    return -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


@pytest.fixture
def sym3() -> ChainModel:
    flip = [[0.75, 0.25], [0.25, 0.75]]
    return ChainModel([0.5, 0.5], [flip, flip])


@pytest.fixture
def entropy3() -> RewardSpec:
    return RewardSpec.homogeneous(ResidualEntropy(), 3)


def random_chain(rng, n, d_max=3, values=False) -> ChainModel:
    domains = rng.integers(2, d_max + 1, size=n)
    prior = rng.dirichlet(np.ones(domains[0]))
    transitions = [
        rng.dirichlet(np.ones(domains[i + 1]), size=domains[i]) for i in range(n - 1)
    ]
    state_values = None
    if values:
        state_values = [np.sort(rng.normal(scale=2.0, size=d)) for d in domains]
    return ChainModel(prior, transitions, state_values=state_values)


def variant_for(rng, kind, d):
    if kind == "entropy":
        return ResidualEntropy()
    if kind == "joint_entropy":
        return JointEntropy()
    if kind == "voi":
        return DecisionVoi(rng.normal(size=(int(rng.integers(2, 4)), d)))
    if kind == "margin":
        return Margin()
    if kind == "variance":
        return WeightedVariance(float(rng.random()) + 0.1)
    if kind == "hotspot":
        size = int(rng.integers(1, d))
        return Hotspot(frozenset(rng.choice(d, size=size, replace=False).tolist()))
    if kind == "expectation":
        return Expectation()
    raise ValueError(kind)


def random_spec(rng, model, kind) -> RewardSpec:
    return RewardSpec(tuple(
        variant_for(rng, kind, model.domain(j)) for j in range(1, model.n + 1)
    ))


def random_costs(rng, n, budget, state_dependent=False, domains=None) -> CostModel:
    if state_dependent:
        penalties = [rng.random(size=domains[j]) * 0.3 for j in range(n)]
        betas = [rng.integers(1, 3, size=domains[j]).tolist() for j in range(n)]
    else:
        penalties = [float(rng.random()) * 0.3 for _ in range(n)]
        betas = rng.integers(1, 3, size=n).tolist()
    return CostModel(penalties, betas, budget)
