import numpy as np
import pytest

from voidp import (ChainModel, Evidence, HmmModel, Mode, ZeroEvidenceError,
                   condition_chain, fold_hmm, joint_from_chain, max_marginal,
                   pairwise_posterior, posterior_marginal, sample,
                   validate_hmm, validate_model)
from voidp.model import _forward_loglik, _weights_from_evidence

from conftest import random_chain


class TestValidate:
    def test_valid_model(self, sym3):
        assert validate_model(sym3).ok

    def test_bad_row_sum_reported_with_location(self):
        model = ChainModel([0.5, 0.5], [[[0.7, 0.2], [0.25, 0.75]]])
        report = validate_model(model)
        assert not report.ok
        assert any("row sum 0.9" in v and "step 1" in v for v in report.violations)

    def test_dimension_mismatch(self):
        t1 = [[0.5, 0.25, 0.25], [0.2, 0.4, 0.4]]       # 2 -> 3 states
        t2 = [[0.5, 0.5], [0.5, 0.5]]                   # expects 3 rows
        report = validate_model(ChainModel([0.5, 0.5], [t1, t2]))
        assert any("dimension mismatch at step 2" in v for v in report.violations)

    def test_negative_entry(self):
        report = validate_model(ChainModel([1.2, -0.2], [[[1, 0], [0, 1]]]))
        assert any("negative" in v for v in report.violations)

    def test_state_values_length(self, sym3):
        bad = ChainModel(sym3.prior, sym3.transitions,
                         state_values=[[0.0, 1.0], [0.0], [0.0, 1.0]])
        assert any("variable 2" in v for v in validate_model(bad).violations)

    def test_hmm_validation(self, sym3):
        ok = HmmModel(sym3, [np.eye(2)] * 3)
        assert validate_hmm(ok).ok
        bad = HmmModel(sym3, [np.array([[0.8, 0.1], [0.2, 0.8]])] * 3)
        assert any("emission row sum" in v for v in validate_hmm(bad).violations)


class TestPosteriorMarginal:
    def test_unconditional_symmetric(self, sym3):
        assert posterior_marginal(sym3, Evidence.empty(), 2).probs == pytest.approx((0.5, 0.5))

    def test_transition_row(self, sym3):
        for mode in (Mode.FILTERING, Mode.SMOOTHING):
            got = posterior_marginal(sym3, Evidence.of({1: 0}, mode), 2)
            assert got.probs == pytest.approx((0.75, 0.25))

    def test_bracketing_evidence(self, sym3):
        got = posterior_marginal(sym3, Evidence.of({1: 0, 3: 0}, Mode.SMOOTHING), 2)
        assert got.probs == pytest.approx((0.9, 0.1), abs=1e-12)

    def test_filtering_ignores_future(self, sym3):
        got = posterior_marginal(sym3, Evidence.of({3: 0}, Mode.FILTERING), 2)
        assert got.probs == pytest.approx((0.5, 0.5))

    def test_observed_index_point_mass(self, sym3):
        got = posterior_marginal(sym3, Evidence.of({2: 1}), 2)
        assert got.probs == pytest.approx((0.0, 1.0))

    def test_filtering_equals_truncated_call(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            model = random_chain(rng, int(rng.integers(3, 7)))
            n = model.n
            picks = rng.choice(n, size=min(3, n), replace=False) + 1
            ev = {int(j): int(rng.integers(0, model.domain(int(j)))) for j in picks}
            j = int(rng.integers(1, n + 1))
            full = posterior_marginal(model, Evidence(ev, Mode.FILTERING), j)
            trunc = posterior_marginal(
                model, Evidence({i: x for i, x in ev.items() if i <= j}, Mode.FILTERING), j)
            assert np.array_equal(full.probs, trunc.probs)

    def test_markov_screening_matches_joint_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            model = random_chain(rng, int(rng.integers(2, 9)))
            n = model.n
            count = int(rng.integers(0, min(4, n) + 1))
            picks = rng.choice(n, size=count, replace=False) + 1
            ev = {int(j): int(rng.integers(0, model.domain(int(j)))) for j in picks}
            joint = joint_from_chain(model)
            for j in range(1, n + 1):
                mine = posterior_marginal(model, Evidence(ev, Mode.SMOOTHING), j).probs
                want = joint.marginal(j, ev)
                assert mine == pytest.approx(want, abs=1e-9)

    def test_normalization(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            model = random_chain(rng, 5)
            probs = posterior_marginal(model, Evidence.empty(), 3).probs
            assert abs(probs.sum() - 1.0) < 1e-9

    def test_zero_evidence_raises(self):
        model = ChainModel([1.0, 0.0], [[[1.0, 0.0], [0.0, 1.0]]])
        with pytest.raises(ZeroEvidenceError):
            posterior_marginal(model, Evidence.of({1: 1}), 2)

    def test_out_of_range_index(self, sym3):
        with pytest.raises(ValueError):
            posterior_marginal(sym3, Evidence.empty(), 4)


class TestPairwisePosterior:
    def test_adjacent(self, sym3):
        got = pairwise_posterior(sym3, Evidence.empty(), 1, 2)
        assert got == pytest.approx(np.array([[0.375, 0.125], [0.125, 0.375]]))

    def test_skip_one(self, sym3):
        got = pairwise_posterior(sym3, Evidence.empty(), 1, 3)
        assert got == pytest.approx(np.array([[0.3125, 0.1875], [0.1875, 0.3125]]))

    def test_conditioning_between(self, sym3):
        got = pairwise_posterior(sym3, Evidence.of({2: 0}), 1, 3)
        assert got == pytest.approx(np.array([[0.5625, 0.1875], [0.1875, 0.0625]]))

    def test_matches_joint_oracle(self):
        rng = np.random.default_rng(19)
        for _ in range(15):
            model = random_chain(rng, 6)
            ev = {4: int(rng.integers(0, model.domain(4)))}
            joint = joint_from_chain(model)
            got = pairwise_posterior(model, Evidence(ev), 2, 6)
            sub = joint._reduced([2, 6, 4], "sum")[:, :, ev[4]]
            want = sub / sub.sum()
            assert got == pytest.approx(want, abs=1e-9)

    def test_order_error(self, sym3):
        with pytest.raises(ValueError):
            pairwise_posterior(sym3, Evidence.empty(), 2, 2)


class TestMaxMarginal:
    def test_deterministic_chain(self):
        point = ChainModel([1.0, 0.0], [[[0.0, 1.0], [1.0, 0.0]]])
        got = max_marginal(point, Evidence.empty(), 2)
        assert got.values == pytest.approx((0.0, 1.0))

    def test_unconditional(self, sym3):
        got = max_marginal(sym3, Evidence.empty(), 2)
        assert got.values == pytest.approx((0.28125, 0.28125), abs=1e-12)

    def test_with_evidence(self, sym3):
        got = max_marginal(sym3, Evidence.of({1: 0}), 2)
        assert got.values == pytest.approx((0.5625, 0.1875), abs=1e-12)

    def test_matches_enumeration(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            model = random_chain(rng, int(rng.integers(2, 9)))
            n = model.n
            count = int(rng.integers(0, 3))
            picks = rng.choice(n, size=count, replace=False) + 1
            ev = {int(j): int(rng.integers(0, model.domain(int(j)))) for j in picks}
            joint = joint_from_chain(model)
            for j in range(1, n + 1):
                if j in ev:
                    continue
                mine = max_marginal(model, Evidence(ev, Mode.SMOOTHING), j).values
                want = joint.max_marginal(j, ev)
                assert mine == pytest.approx(want, abs=1e-9)

    def test_bounded_by_smoothed_marginal(self):
        rng = np.random.default_rng(29)
        model = random_chain(rng, 6)
        ev = Evidence.of({2: 0})
        for j in (1, 3, 4, 5, 6):
            mm = max_marginal(model, ev, j).values
            pm = posterior_marginal(model, ev, j).probs
            assert np.all(mm <= pm + 1e-12)


class TestFoldHmm:
    def test_identity_emissions(self, sym3):
        hmm = HmmModel(sym3, [np.eye(2)] * 3)
        folded = fold_hmm(hmm, [0, 0, 0])
        assert folded.prior == pytest.approx((1.0, 0.0))
        for t in folded.transitions:
            assert t[0] == pytest.approx((1.0, 0.0))

    def test_uniform_emissions_keep_chain(self, sym3):
        hmm = HmmModel(sym3, [np.full((2, 2), 0.5)] * 3)
        folded = fold_hmm(hmm, [1, 0, 1])
        assert folded.prior == pytest.approx(sym3.prior)
        for mine, orig in zip(folded.transitions, sym3.transitions):
            assert mine == pytest.approx(orig)

    def test_noisy_emissions_match_joint_oracle(self, sym3):
        noisy = np.array([[0.9, 0.1], [0.1, 0.9]])
        hmm = HmmModel(sym3, [noisy] * 3)
        folded = fold_hmm(hmm, [0, 0, 0])
        # Oracle: enumerate the joint over hidden and emission variables.
        table = np.zeros((2,) * 3)
        chain_joint = joint_from_chain(sym3).table
        for idx in np.ndindex(*table.shape):
            lik = np.prod([noisy[idx[i], 0] for i in range(3)])
            table[idx] = chain_joint[idx] * lik
        table /= table.sum()
        folded_joint = joint_from_chain(folded).table
        assert folded_joint == pytest.approx(table, abs=1e-9)

    def test_random_instances_match_oracle(self):
        rng = np.random.default_rng(31)
        for _ in range(15):
            hidden = random_chain(rng, int(rng.integers(2, 7)))
            n = hidden.n
            emissions = [rng.dirichlet(np.ones(int(rng.integers(2, 4))),
                                       size=hidden.domain(i)) for i in range(1, n + 1)]
            hmm = HmmModel(hidden, emissions)
            obs = [int(rng.integers(0, e.shape[1])) for e in emissions]
            folded = fold_hmm(hmm, obs)
            table = joint_from_chain(hidden).table.copy()
            for i in range(n):
                shape = [1] * n
                shape[i] = hidden.domain(i + 1)
                table = table * emissions[i][:, obs[i]].reshape(shape)
            table /= table.sum()
            assert joint_from_chain(folded).table == pytest.approx(table, abs=1e-9)

    def test_wrong_length(self, sym3):
        hmm = HmmModel(sym3, [np.eye(2)] * 3)
        with pytest.raises(ValueError):
            fold_hmm(hmm, [0, 0])

    def test_out_of_range_symbol(self, sym3):
        hmm = HmmModel(sym3, [np.eye(2)] * 3)
        with pytest.raises(ValueError):
            fold_hmm(hmm, [0, 2, 0])

    def test_zero_probability_observation(self):
        hidden = ChainModel([1.0, 0.0], [[[1.0, 0.0], [0.0, 1.0]]])
        emissions = [np.array([[1.0, 0.0], [0.0, 1.0]])] * 2
        hmm = HmmModel(hidden, emissions)
        with pytest.raises(ZeroEvidenceError):
            fold_hmm(hmm, [1, 1])

    def test_condition_chain_matches_oracle(self):
        rng = np.random.default_rng(37)
        model = random_chain(rng, 6)
        ev = {2: 1, 5: 0}
        folded = condition_chain(model, Evidence(ev))
        joint = joint_from_chain(model)
        for j in range(1, 7):
            want = joint.marginal(j, ev)
            got = posterior_marginal(folded, Evidence.empty(), j).probs
            assert got == pytest.approx(want, abs=1e-9)


class TestSampling:
    def test_deterministic_chain(self):
        point = ChainModel([0.0, 1.0], [[[1.0, 0.0], [0.0, 1.0]]])
        for seed in (0, 1, 2):
            assert sample(point, seed).tolist() == [1, 1]

    def test_prior_frequency(self, sym3):
        draws = sample(sym3, 1, size=100_000)
        assert abs((draws[:, 0] == 0).mean() - 0.5) < 0.01

    def test_conditional_frequency(self, sym3):
        draws = sample(sym3, 2, size=100_000)
        x1 = draws[:, 0] == 0
        frac = (draws[x1, 1] == 0).mean()
        assert abs(frac - 0.75) < 0.02

    def test_seed_reproducibility(self, sym3):
        a = sample(sym3, 42, size=50)
        b = sample(sym3, 42, size=50)
        assert np.array_equal(a, b)


class TestLogSpace:
    def test_loglik_matches_linear(self):
        rng = np.random.default_rng(41)
        for _ in range(10):
            model = random_chain(rng, 8)
            picks = rng.choice(8, size=3, replace=False) + 1
            ev = {int(j): int(rng.integers(0, model.domain(int(j)))) for j in picks}
            weights = _weights_from_evidence(model, ev)
            lin = _forward_loglik(model, weights, log_space=False)
            log = _forward_loglik(model, weights, log_space=True)
            assert log == pytest.approx(lin, abs=1e-9)

    def test_long_chain_stability(self):
        # A sticky 2-state chain long enough that naive products underflow.
        flip = [[1 - 1e-5, 1e-5], [1e-5, 1 - 1e-5]]
        model = ChainModel([0.5, 0.5], [flip] * 2000)
        probs = posterior_marginal(model, Evidence.of({1: 0, 2001: 0}), 1000).probs
        assert abs(probs.sum() - 1.0) < 1e-9
        assert probs[0] > 0.99
