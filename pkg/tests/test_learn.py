import numpy as np
import pytest

from voidp import ChainModel, sample, validate_model
from voidp.learn import (BinSpec, SeriesDataset, learn_chain, load_series_csv,
                         synthetic_diurnal)


class TestLearnChain:
    def test_pseudocount_arithmetic(self):
        # Transition counts 0->0: 3, 0->1: 1 with alpha = 0.5 and d = 2
        # give (3 + 0.5) / (4 + 1) = 0.7.
        seqs = np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 1.0]])
        dataset = SeriesDataset(seqs, BinSpec(count=2, width=1.0))
        model = learn_chain(dataset, alpha=0.5)
        assert model.transitions[0][0, 0] == pytest.approx(0.7)
        assert model.transitions[0][0, 1] == pytest.approx(0.3)

    def test_unseen_rows_become_uniform(self):
        seqs = np.array([[0.0, 0.0]] * 4)
        dataset = SeriesDataset(seqs, BinSpec(count=2, width=1.0))
        model = learn_chain(dataset, alpha=0.5)
        # State 1 never occurs, its outgoing row is pure smoothing.
        assert model.transitions[0][1] == pytest.approx([0.5, 0.5])

    def test_learned_model_is_valid(self):
        dataset = synthetic_diurnal(50, seed=3)
        model = learn_chain(dataset, alpha=0.5)
        assert validate_model(model).ok
        assert model.state_values is not None

    def test_recovers_generator(self):
        # Sample sequences from a known chain and relearn its transitions.
        flip = [[0.75, 0.25], [0.25, 0.75]]
        truth = ChainModel([0.5, 0.5], [flip, flip])
        draws = sample(truth, 1, size=10_000).astype(float)
        dataset = SeriesDataset(draws, BinSpec(count=2, width=1.0))
        model = learn_chain(dataset, alpha=0.5)
        assert model.prior == pytest.approx(truth.prior, abs=0.02)
        for mine, want in zip(model.transitions, truth.transitions):
            assert mine == pytest.approx(want, abs=0.02)

    def test_tying_pools_counts(self):
        rng = np.random.default_rng(9)
        seqs = rng.normal(size=(40, 6))
        dataset = SeriesDataset(seqs, BinSpec(count=3), tying=(0, 0, 0, 1, 1))
        model = learn_chain(dataset, alpha=0.5)
        assert np.array_equal(model.transitions[0], model.transitions[1])
        assert np.array_equal(model.transitions[1], model.transitions[2])
        assert np.array_equal(model.transitions[3], model.transitions[4])
        assert not np.array_equal(model.transitions[0], model.transitions[3])

    def test_rejects_empty_and_bad_bins(self):
        with pytest.raises(ValueError):
            SeriesDataset(np.zeros((0, 5)), BinSpec(count=3))
        with pytest.raises(ValueError):
            BinSpec(count=1)

    def test_quantile_bins_balance_mass(self):
        rng = np.random.default_rng(13)
        seqs = rng.exponential(size=(100, 8))
        dataset = SeriesDataset(seqs, BinSpec(count=4, mode="quantile"))
        states, _ = dataset.discretized()
        counts = np.bincount(states.ravel(), minlength=4)
        assert counts.min() > 0.15 * states.size


class TestCsvIngestion:
    def test_interpolates_missing_cells(self, tmp_path):
        path = tmp_path / "series.csv"
        path.write_text("1.0,,3.0,4.0\n2.0,2.5,,3.5\n")
        dataset = load_series_csv(path, BinSpec(count=2))
        assert dataset.sequences[0] == pytest.approx([1.0, 2.0, 3.0, 4.0])
        assert dataset.sequences[1] == pytest.approx([2.0, 2.5, 3.0, 3.5])

    def test_ragged_rows_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0,2.0\n1.0,2.0,3.0\n")
        with pytest.raises(ValueError):
            load_series_csv(path, BinSpec(count=2))

    def test_all_missing_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text(",,,\n")
        with pytest.raises(ValueError):
            load_series_csv(path, BinSpec(count=2))


class TestSyntheticDiurnal:
    def test_deterministic_given_seed(self):
        a = synthetic_diurnal(5, seed=4).sequences
        b = synthetic_diurnal(5, seed=4).sequences
        assert np.array_equal(a, b)

    def test_shape_and_tying(self):
        dataset = synthetic_diurnal(7, seed=0)
        assert dataset.sequences.shape == (7, 24)
        assert len(dataset.tying) == 23
        assert set(dataset.tying) == {0, 1, 2, 3}
