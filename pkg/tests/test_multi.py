import numpy as np
import pytest

from voidp import (ChainModel, CostModel, DecisionVoi, Margin, Mode,
                   MultiChainModel, ProductCoupling, ResidualEntropy,
                   RewardSpec, SamplerCoupling, cross_chain_expected_reward,
                   expected_local_reward, flatten_joint, lower_bound_objective,
                   oracle_total_reward, recent_observation_filter, sample,
                   schedule_multi, select_subset)

from conftest import random_chain


def make_independent(rng, horizon=3, d=2):
    c1 = random_chain(rng, horizon, d_max=d)
    c2 = random_chain(rng, horizon, d_max=d)
    spec1 = RewardSpec.homogeneous(DecisionVoi(rng.normal(size=(3, 2))), horizon)
    spec2 = RewardSpec.homogeneous(DecisionVoi(rng.normal(size=(3, 2))), horizon)
    coupling = ProductCoupling.independent([c1, c2])
    return MultiChainModel([c1, c2], [spec1, spec2], coupling)


def make_coupled(rng, horizon=3):
    product = ChainModel(rng.dirichlet(np.ones(4)),
                         [rng.dirichlet(np.ones(4), size=4) for _ in range(horizon - 1)])
    coupling = ProductCoupling(product, [(2, 2)] * horizon)
    sensors = coupling.sensor_views()
    specs = [RewardSpec.homogeneous(DecisionVoi(rng.normal(size=(3, 2))), horizon)
             for _ in range(2)]
    return MultiChainModel(sensors, specs, coupling)


class TestRecentObservationFilter:
    def test_worked_example(self):
        kept = recent_observation_filter({(1, 1), (2, 2), (1, 4)}, 5)
        assert kept == frozenset({(2, 2), (1, 4)})

    def test_empty(self):
        assert recent_observation_filter(set(), 4) == frozenset()

    def test_future_only(self):
        assert recent_observation_filter({(1, 3)}, 2) == frozenset()


class TestCrossChainReward:
    def test_independent_equals_single_chain(self):
        rng = np.random.default_rng(201)
        multi = make_independent(rng)
        for s in (1, 2):
            model = multi.sensors[s - 1]
            spec = multi.rewards[s - 1]
            for j in range(1, 4):
                for a in [None] + list(range(1, j)):
                    got = cross_chain_expected_reward(
                        multi, s, j, own_separator=a, schedules={1: (1,), 2: (2,)})
                    want = expected_local_reward(model, spec, j,
                                                 (a,) if a else (), Mode.FILTERING)
                    assert got == pytest.approx(want, abs=1e-12)

    def test_exact_matches_flat_joint(self):
        rng = np.random.default_rng(202)
        multi = make_coupled(rng)
        joint, index_of = flatten_joint(multi)
        costs = CostModel.uniform(6, 6)
        for s in (1, 2):
            for j in (2, 3):
                other = 2 if s == 1 else 1
                got = cross_chain_expected_reward(multi, s, j, own_separator=1,
                                                  schedules={other: (2,)})
                # Oracle: expected reward of the flattened variable given its
                # separator set, read off the dense joint.
                evidence_vars = [index_of(s, 1), index_of(other, min(2, j))]
                spec_vars = [None] * 6
                for t in range(1, 4):
                    for q in (1, 2):
                        spec_vars[index_of(q, t) - 1] = multi.rewards[q - 1].of(t)
                flat_spec = RewardSpec(tuple(spec_vars))
                from voidp.oracles import _local_reward_sum
                want = _local_reward_sum(joint, flat_spec, index_of(s, j),
                                         evidence_vars, Mode.SMOOTHING)
                assert got == pytest.approx(want, abs=1e-9)

    def test_sampled_close_to_exact(self):
        rng = np.random.default_rng(203)
        multi = make_coupled(rng)
        exact = cross_chain_expected_reward(multi, 1, 3, own_separator=1,
                                            schedules={2: (2,)})
        sampled = cross_chain_expected_reward(multi, 1, 3, own_separator=1,
                                              schedules={2: (2,)},
                                              sample_count=100_000, rng=5)
        assert sampled == pytest.approx(exact, abs=0.01)

    def test_sampler_requires_seed(self):
        rng = np.random.default_rng(204)
        multi = make_coupled(rng)
        with pytest.raises(ValueError):
            cross_chain_expected_reward(multi, 1, 2, sample_count=100, rng=None)

    def test_sampler_coupling_works(self):
        rng = np.random.default_rng(205)
        exact_multi = make_coupled(rng)

        def draw(gen, size):
            return exact_multi.coupling.sample(gen, size)

        sampler = SamplerCoupling(draw, [(2, 2)] * 3)
        multi = MultiChainModel(exact_multi.sensors, exact_multi.rewards, sampler)
        exact = cross_chain_expected_reward(exact_multi, 1, 2, own_separator=1,
                                            schedules={2: (2,)})
        approx = cross_chain_expected_reward(multi, 1, 2, own_separator=1,
                                             schedules={2: (2,)},
                                             sample_count=150_000, rng=17)
        assert approx == pytest.approx(exact, abs=0.01)
        with pytest.raises(ValueError):
            cross_chain_expected_reward(multi, 1, 2, schedules={2: (2,)})


class TestScheduleMulti:
    def test_single_sensor_reduction(self):
        rng = np.random.default_rng(211)
        chain = random_chain(rng, 4, d_max=2)
        spec = RewardSpec.homogeneous(ResidualEntropy(), 4)
        multi = MultiChainModel([chain], [spec], ProductCoupling.independent([chain]))
        costs = CostModel.uniform(4, 2)
        result = schedule_multi(multi, costs)
        single = select_subset(chain, spec, costs, Mode.FILTERING)
        assert result.schedules[0] == single.selected
        assert result.objective == single.value

    def test_independent_chains_keep_singleton_optima(self):
        rng = np.random.default_rng(212)
        multi = make_independent(rng)
        costs = CostModel.uniform(3, 1)
        result = schedule_multi(multi, costs)
        singles = [select_subset(multi.sensors[s], multi.rewards[s], costs,
                                 Mode.FILTERING) for s in range(2)]
        assert result.schedules == (singles[0].selected, singles[1].selected)
        assert result.objective == pytest.approx(singles[0].value + singles[1].value,
                                                 abs=1e-9)

    def test_coupled_trace_monotone_and_dominant(self):
        rng = np.random.default_rng(213)
        multi = make_coupled(rng)
        costs = CostModel.uniform(3, 1)
        result = schedule_multi(multi, costs)
        for before, after in zip(result.trace, result.trace[1:]):
            assert after >= before - 1e-9
        # Initialization is the independent per-chain optimum, so the
        # final objective dominates independent scheduling.
        assert result.objective >= result.trace[0] - 1e-9

    def test_random_init_supported(self):
        rng = np.random.default_rng(214)
        multi = make_coupled(rng)
        costs = CostModel.uniform(3, 1)
        result = schedule_multi(multi, costs, init="random", rng=3)
        for before, after in zip(result.trace, result.trace[1:]):
            assert after >= before - 1e-9
        with pytest.raises(ValueError):
            schedule_multi(multi, costs, init="random")

    def test_recent_observation_bound_is_lower_bound(self):
        # With max-expected-utility rewards, dropping older observations
        # can only lower the objective.
        rng = np.random.default_rng(215)
        for _ in range(5):
            multi = make_coupled(rng)
            joint, index_of = flatten_joint(multi)
            schedules = {1: (1,), 2: (1, 3)}
            costs = CostModel.uniform(3, 3)
            bound = lower_bound_objective(multi, schedules, costs)
            spec_vars = [None] * 6
            for t in range(1, 4):
                for q in (1, 2):
                    spec_vars[index_of(q, t) - 1] = multi.rewards[q - 1].of(t)
            flat_spec = RewardSpec(tuple(spec_vars))
            # True filtering objective: every reward at time t conditions on
            # all scheduled observations at times <= t, of every sensor.
            from voidp.oracles import _local_reward_sum
            truth = 0.0
            for q in (1, 2):
                for t in (1, 2, 3):
                    evidence = sorted(index_of(s2, tt)
                                      for s2, times in schedules.items()
                                      for tt in times if tt <= t)
                    truth += _local_reward_sum(joint, flat_spec, index_of(q, t),
                                               evidence, Mode.SMOOTHING)
            assert bound <= truth + 1e-9


class TestValidation:
    def test_marginal_agreement_enforced(self):
        rng = np.random.default_rng(221)
        multi = make_coupled(rng)
        multi.validate_marginals()
        # Perturb one sensor chain so its marginals drift from the coupling.
        sensors = list(multi.sensors)
        bad = ChainModel([0.9, 0.1], sensors[0].transitions)
        broken = MultiChainModel([bad, sensors[1]], list(multi.rewards), multi.coupling)
        with pytest.raises(ValueError):
            broken.validate_marginals()

    def test_max_marginal_rewards_rejected(self):
        rng = np.random.default_rng(222)
        chain = random_chain(rng, 3, d_max=2)
        with pytest.raises(TypeError):
            MultiChainModel([chain], [RewardSpec.homogeneous(Margin(), 3)],
                            ProductCoupling.independent([chain]))

    def test_horizon_mismatch(self):
        rng = np.random.default_rng(223)
        c1 = random_chain(rng, 3, d_max=2)
        c2 = random_chain(rng, 4, d_max=2)
        with pytest.raises(ValueError):
            MultiChainModel([c1, c2],
                            [RewardSpec.homogeneous(ResidualEntropy(), 3)] * 2,
                            ProductCoupling.independent([c1, c1]))
