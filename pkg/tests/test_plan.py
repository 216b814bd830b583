import itertools

import numpy as np
import pytest

from voidp import (CallbackSource, ChainModel, CostModel, Mode, PlanExecution,
                   RecordedSource, ResidualEntropy, RewardSpec, SampledSource,
                   VoidpError, build_plan, execute_plan, joint_from_chain,
                   oracle_best_plan, plan_value, select_subset)

from conftest import (REWARD_KINDS, binary_entropy, random_chain, random_costs,
                      random_spec)


class TestSmallExamples:
    @pytest.mark.parametrize("mode", (Mode.SMOOTHING, Mode.FILTERING))
    def test_zero_budget_is_empty_selection_value(self, sym3, entropy3, mode):
        tables = build_plan(sym3, entropy3, CostModel.uniform(3, 0), mode)
        assert tables.root_value == pytest.approx(-3.0)
        episode = execute_plan(tables, RecordedSource([0, 0, 0]))
        assert episode.queried == ()
        assert episode.spent_budget == 0

    def test_single_query_equals_best_singleton(self, sym3, entropy3):
        tables = build_plan(sym3, entropy3, CostModel.uniform(3, 1), Mode.SMOOTHING)
        expected = -2 * binary_entropy(0.75)
        assert tables.root_value == pytest.approx(expected, abs=1e-9)
        subset = select_subset(sym3, entropy3, CostModel.uniform(3, 1), Mode.SMOOTHING)
        assert tables.root_value == pytest.approx(subset.value, abs=1e-12)

    def test_first_query_is_middle_variable(self, sym3, entropy3):
        tables = build_plan(sym3, entropy3, CostModel.uniform(3, 1), Mode.SMOOTHING)
        walk = PlanExecution(tables)
        assert walk.next_index == 2

    def test_episode_conditional_reward(self, sym3, entropy3):
        tables = build_plan(sym3, entropy3, CostModel.uniform(3, 1), Mode.SMOOTHING)
        episode = execute_plan(tables, RecordedSource([0, 0, 0]))
        assert episode.queried == ((2, 0),)
        assert episode.spent_budget == 1
        # Conditional entropies of both neighbors given the middle value.
        assert episode.realized_reward == pytest.approx(-2 * binary_entropy(0.75), abs=1e-9)


class TestCertification:
    @pytest.mark.parametrize("mode", (Mode.SMOOTHING, Mode.FILTERING))
    def test_matches_plan_enumeration(self, mode):
        rng = np.random.default_rng(7001 if mode is Mode.SMOOTHING else 7002)
        for trial in range(25):
            n = int(rng.integers(2, 5))
            kind = REWARD_KINDS[trial % len(REWARD_KINDS)]
            model = random_chain(rng, n, d_max=2, values=True)
            spec = random_spec(rng, model, kind)
            state_dependent = trial % 4 == 0
            costs = random_costs(rng, n, int(rng.integers(0, 4)),
                                 state_dependent=state_dependent,
                                 domains=model.domains)
            tables = build_plan(model, spec, costs, mode)
            want = oracle_best_plan(joint_from_chain(model), spec, costs, mode)
            assert tables.root_value == pytest.approx(want, abs=1e-9), (trial, kind)

    def test_plan_value_consistency(self):
        rng = np.random.default_rng(7010)
        for trial in range(12):
            n = int(rng.integers(2, 5))
            model = random_chain(rng, n, d_max=2, values=True)
            spec = random_spec(rng, model, REWARD_KINDS[trial % len(REWARD_KINDS)])
            costs = random_costs(rng, n, 2)
            for mode in (Mode.SMOOTHING, Mode.FILTERING):
                tables = build_plan(model, spec, costs, mode)
                assert plan_value(tables) == pytest.approx(tables.root_value, abs=1e-9)

    def test_plan_dominates_subset(self):
        rng = np.random.default_rng(7020)
        for trial in range(12):
            n = int(rng.integers(2, 6))
            model = random_chain(rng, n, values=True)
            spec = random_spec(rng, model, REWARD_KINDS[trial % len(REWARD_KINDS)])
            costs = CostModel.uniform(n, int(rng.integers(0, n + 1)))
            for mode in (Mode.SMOOTHING, Mode.FILTERING):
                plan_root = build_plan(model, spec, costs, mode).root_value
                subset_value = select_subset(model, spec, costs, mode).value
                assert plan_root >= subset_value - 1e-9

    def test_budget_monotone(self):
        rng = np.random.default_rng(7030)
        model = random_chain(rng, 4, d_max=2)
        spec = RewardSpec.homogeneous(ResidualEntropy(), 4)
        previous = -np.inf
        for budget in range(5):
            root = build_plan(model, spec, CostModel.uniform(4, budget),
                              Mode.SMOOTHING).root_value
            assert root >= previous - 1e-9
            previous = root

    def test_monte_carlo_agrees(self):
        rng = np.random.default_rng(7040)
        model = random_chain(rng, 4, d_max=2)
        spec = RewardSpec.homogeneous(ResidualEntropy(), 4)
        tables = build_plan(model, spec, CostModel.uniform(4, 2), Mode.SMOOTHING)
        source = SampledSource(model, 424242)
        total = 0.0
        episodes = 100_000
        for _ in range(episodes):
            total += execute_plan(tables, source).realized_reward
        assert total / episodes == pytest.approx(plan_value(tables), abs=0.01)


class TestExecution:
    def test_every_branch_respects_budget(self):
        rng = np.random.default_rng(7050)
        for trial in range(8):
            n = int(rng.integers(2, 5))
            model = random_chain(rng, n, d_max=2)
            spec = RewardSpec.homogeneous(ResidualEntropy(), n)
            costs = random_costs(rng, n, int(rng.integers(0, 4)),
                                 state_dependent=trial % 2 == 0,
                                 domains=model.domains)
            for mode in (Mode.SMOOTHING, Mode.FILTERING):
                tables = build_plan(model, spec, costs, mode)
                for world in itertools.product(*(range(model.domain(j + 1))
                                                 for j in range(n))):
                    episode = execute_plan(tables, RecordedSource(list(world)))
                    assert episode.spent_budget <= costs.budget

    def test_filtering_queries_increase(self):
        rng = np.random.default_rng(7060)
        model = random_chain(rng, 5, d_max=2)
        spec = RewardSpec.homogeneous(ResidualEntropy(), 5)
        tables = build_plan(model, spec, CostModel.uniform(5, 3), Mode.FILTERING)
        for world in itertools.product(range(2), repeat=5):
            episode = execute_plan(tables, RecordedSource(list(world)))
            order = [j for j, _ in episode.queried]
            assert order == sorted(order)

    def test_wrong_answer_index_rejected(self, sym3, entropy3):
        tables = build_plan(sym3, entropy3, CostModel.uniform(3, 1), Mode.SMOOTHING)
        walk = PlanExecution(tables)
        with pytest.raises(ValueError):
            walk.answer(1, 0)

    def test_out_of_range_state_rejected(self, sym3, entropy3):
        tables = build_plan(sym3, entropy3, CostModel.uniform(3, 1), Mode.SMOOTHING)
        walk = PlanExecution(tables)
        with pytest.raises(ValueError):
            walk.answer(2, 5)

    def test_answer_after_done_rejected(self, sym3, entropy3):
        tables = build_plan(sym3, entropy3, CostModel.uniform(3, 1), Mode.SMOOTHING)
        walk = PlanExecution(tables)
        walk.answer(2, 0)
        assert walk.done
        with pytest.raises(VoidpError):
            walk.answer(1, 0)

    def test_missing_recorded_answer(self, sym3, entropy3):
        tables = build_plan(sym3, entropy3, CostModel.uniform(3, 1), Mode.SMOOTHING)
        with pytest.raises(KeyError):
            execute_plan(tables, RecordedSource({1: 0}))

    def test_callback_source(self, sym3, entropy3):
        tables = build_plan(sym3, entropy3, CostModel.uniform(3, 2), Mode.SMOOTHING)
        episode = execute_plan(tables, CallbackSource(lambda j: 0))
        assert all(x == 0 for _, x in episode.queried)

    def test_sigma_within_budget(self, sym3, entropy3):
        costs = CostModel.uniform(3, 3)
        tables = build_plan(sym3, entropy3, costs, Mode.SMOOTHING)
        for (a, b), sigma in tables.sigma.items():
            budget_axis = sigma.shape[-1]
            for k in range(budget_axis):
                assert sigma[..., k].max() <= max(k - 1, 0) or k == 0


class TestEvalCounters:
    @pytest.mark.parametrize("mode,bound", [
        (Mode.SMOOTHING, lambda d, B, n: d ** 3 * B ** 2 * (n + 2) ** 3),
        (Mode.FILTERING, lambda d, B, n: d ** 3 * B * (n + 2) ** 3),
    ])
    def test_counter_bound(self, mode, bound):
        rng = np.random.default_rng(7070)
        for _ in range(6):
            n = int(rng.integers(2, 6))
            budget = int(rng.integers(1, 4))
            model = random_chain(rng, n)
            spec = RewardSpec.homogeneous(ResidualEntropy(), n)
            tables = build_plan(model, spec, CostModel.uniform(n, budget), mode)
            d = max(model.domains)
            assert tables.eval_count <= bound(d, budget, n)
