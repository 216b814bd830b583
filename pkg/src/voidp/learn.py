"""Chain model learning from real-valued time series.

Sequences are discretized into bins (fixed width or quantiles) and the
transition rows are estimated from counts with additive pseudocounts,
optionally pooling steps that share a tying bucket (e.g. four
time-of-day regimes over a 24-step day).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .model import ChainModel


@dataclass(frozen=True)
class BinSpec:
    """Discretization rule for raw samples.

    ``width`` mode lays equal-width bins starting at the data minimum
    (width derived from the range when not given); ``quantile`` mode
    picks edges at equally spaced sample quantiles.
    """

    count: int
    mode: str = "width"
    width: float = None

    def __post_init__(self):
        if self.count < 2:
            raise ValueError("bin count must be at least 2")
        if self.mode not in ("width", "quantile"):
            raise ValueError(f"unknown binning mode {self.mode!r}")

    def edges(self, data: np.ndarray) -> np.ndarray:
        flat = np.asarray(data, dtype=float).ravel()
        flat = flat[np.isfinite(flat)]
        if flat.size == 0:
            raise ValueError("cannot derive bin edges from empty data")
        if self.mode == "quantile":
            qs = np.linspace(0.0, 1.0, self.count + 1)
            edges = np.quantile(flat, qs)
            edges[0], edges[-1] = -np.inf, np.inf
            return edges
        lo = float(flat.min())
        hi = float(flat.max())
        width = self.width if self.width is not None else max((hi - lo) / self.count, 1e-12)
        edges = lo + width * np.arange(self.count + 1)
        edges[0], edges[-1] = -np.inf, max(edges[-1], hi + 1e-12)
        return edges


@dataclass(frozen=True)
class SeriesDataset:
    """Equal-length real-valued sequences plus binning and tying rules.

    ``tying`` assigns each transition step (1..n-1) a bucket id; steps in
    one bucket share pooled transition counts.  None means one bucket per
    step.
    """

    sequences: np.ndarray
    bins: BinSpec
    tying: tuple = None

    def __post_init__(self):
        seq = np.asarray(self.sequences, dtype=float)
        if seq.ndim != 2 or seq.shape[0] == 0 or seq.shape[1] < 2:
            raise ValueError("sequences must be a nonempty (num_sequences, n>=2) array")
        object.__setattr__(self, "sequences", seq)
        if self.tying is not None:
            tying = tuple(int(b) for b in self.tying)
            if len(tying) != seq.shape[1] - 1:
                raise ValueError("one tying bucket per transition step expected")
            object.__setattr__(self, "tying", tying)

    @property
    def n(self) -> int:
        return self.sequences.shape[1]

    def discretized(self):
        """Bin indices for every sample plus the per-bin center values."""
        edges = self.bins.edges(self.sequences)
        states = np.clip(np.searchsorted(edges, self.sequences, side="right") - 1,
                         0, self.bins.count - 1)
        finite = np.copy(edges)
        finite[0] = edges[1] - (edges[2] - edges[1]) if len(edges) > 2 else edges[1] - 1.0
        finite[-1] = edges[-2] + (edges[-2] - edges[-3]) if len(edges) > 2 else edges[-2] + 1.0
        centers = (finite[:-1] + finite[1:]) / 2.0
        return states.astype(int), centers


def learn_chain(dataset: SeriesDataset, alpha: float = 0.5) -> ChainModel:
    """Estimate a chain from binned sequences with pseudocount smoothing.

    Each transition entry is (count + alpha) / (row count + alpha * d),
    pooled over the steps of a tying bucket; the prior uses the same
    smoothing on first-step counts.
    """
    if alpha < 0:
        raise ValueError("pseudocount must be nonnegative")
    states, centers = dataset.discretized()
    d = dataset.bins.count
    n = dataset.n
    first = np.bincount(states[:, 0], minlength=d).astype(float)
    prior = (first + alpha) / (first.sum() + alpha * d)
    tying = dataset.tying if dataset.tying is not None else tuple(range(n - 1))
    buckets = {}
    for step in range(n - 1):
        buckets.setdefault(tying[step], []).append(step)
    bucket_matrix = {}
    for bucket, steps in buckets.items():
        counts = np.zeros((d, d))
        for step in steps:
            np.add.at(counts, (states[:, step], states[:, step + 1]), 1.0)
        rows = counts.sum(axis=1, keepdims=True)
        bucket_matrix[bucket] = (counts + alpha) / (rows + alpha * d)
    transitions = [bucket_matrix[tying[step]] for step in range(n - 1)]
    return ChainModel(prior, transitions, state_values=[centers] * n)


def load_series_csv(path, bins: BinSpec, tying=None) -> SeriesDataset:
    """Read one sequence per CSV row, linearly interpolating missing cells."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or all(not cell.strip() for cell in row):
                continue
            values = []
            for cell in row:
                cell = cell.strip()
                if not cell or cell.lower() in ("nan", "na", "null"):
                    values.append(np.nan)
                else:
                    values.append(float(cell))
            rows.append(values)
    if not rows:
        raise ValueError(f"no data rows in {path}")
    length = len(rows[0])
    if any(len(r) != length for r in rows):
        raise ValueError("all sequences must have the same length")
    data = np.array(rows, dtype=float)
    for seq in data:
        bad = np.isnan(seq)
        if bad.all():
            raise ValueError("a sequence consists entirely of missing cells")
        if bad.any():
            idx = np.arange(length)
            seq[bad] = np.interp(idx[bad], idx[~bad], seq[~bad])
    return SeriesDataset(data, bins, tying)


def synthetic_diurnal(num_sequences: int, num_steps: int = 24, seed=0,
                      mean: float = 290.0, amplitude: float = 5.0,
                      noise: float = 0.8) -> SeriesDataset:
    """Temperature-like day curves: a sine over the day plus AR(1) noise.

    A stand-in for non-redistributable sensor recordings; the daily
    structure makes evenly spaced observations clearly suboptimal.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(num_steps)
    base = mean + amplitude * np.sin(2.0 * np.pi * (t - 8.0) / num_steps)
    data = np.empty((num_sequences, num_steps))
    for i in range(num_sequences):
        drift = 0.0
        shift = rng.normal(scale=1.5)
        for k in range(num_steps):
            drift = 0.7 * drift + rng.normal(scale=noise)
            data[i, k] = base[k] + shift + drift
    bucket = [min(k // (num_steps // 4), 3) for k in range(num_steps - 1)]
    return SeriesDataset(data, BinSpec(count=10, mode="width", width=2.0),
                         tying=tuple(bucket))
