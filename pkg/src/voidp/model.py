"""Discrete chain models and exact inference primitives.

Variables of a chain are indexed 1..n and states of variable j are
0..d_j-1.  Two artificial endpoints, index 0 and n+1, each with a single
state, are used internally so that every sub-chain computation has a left
and a right anchor; they never appear in public results.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ZeroEvidenceError

PROB_ATOL = 1e-9


class Mode(enum.Enum):
    """Conditioning regime for rewards and inference.

    Filtering conditions each variable only on observations at indices
    less than or equal to its own; smoothing conditions on everything.
    """

    FILTERING = "filtering"
    SMOOTHING = "smoothing"

    @classmethod
    def coerce(cls, value) -> "Mode":
        if isinstance(value, Mode):
            return value
        return cls(str(value).lower())


def _read_only(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


class ChainModel:
    """Discrete, possibly nonstationary Markov chain.

    Parameters
    ----------
    prior : array-like
        Probability vector over the states of variable 1.
    transitions : sequence of array-like
        For i = 1..n-1 a row-stochastic d_i x d_{i+1} matrix giving
        P(X_{i+1} | X_i).  Matrices may differ per step.
    state_values : sequence of array-like, optional
        One real value per state of each variable (bin centers), required
        by numeric rewards (variance / expectation).
    """

    def __init__(self, prior, transitions, state_values=None):
        self.prior = _read_only(prior)
        self.transitions = tuple(_read_only(t) for t in transitions)
        if state_values is None:
            self.state_values = None
        else:
            self.state_values = tuple(_read_only(v) for v in state_values)
        self._prop_cache = None

    @property
    def n(self) -> int:
        return len(self.transitions) + 1

    @property
    def domains(self) -> tuple:
        """Per-variable state counts, index 0 of the tuple is variable 1."""
        return (self.prior.shape[0],) + tuple(t.shape[1] for t in self.transitions)

    def domain(self, j: int) -> int:
        return self.domains[j - 1]

    def transition(self, i: int) -> np.ndarray:
        """Row-stochastic matrix for the step from variable i to i+1."""
        return self.transitions[i - 1]

    def values_of(self, j: int) -> np.ndarray:
        if self.state_values is None:
            raise ValueError(f"model carries no state values (needed for variable {j})")
        return self.state_values[j - 1]

    def _prop(self) -> "_Propagation":
        if self._prop_cache is None:
            self._prop_cache = _Propagation(self)
        return self._prop_cache

    def __eq__(self, other):
        if not isinstance(other, ChainModel):
            return NotImplemented
        if self.domains != other.domains:
            return False
        if not np.array_equal(self.prior, other.prior):
            return False
        if any(not np.array_equal(a, b) for a, b in zip(self.transitions, other.transitions)):
            return False
        if (self.state_values is None) != (other.state_values is None):
            return False
        if self.state_values is not None:
            return all(
                np.array_equal(a, b) for a, b in zip(self.state_values, other.state_values)
            )
        return True


@dataclass(frozen=True)
class HmmModel:
    """Hidden chain plus per-step emission matrices.

    ``emissions[i-1]`` is a d_i x e_i row-stochastic matrix over the
    observation alphabet of step i.
    """

    hidden: ChainModel
    emissions: tuple

    def __post_init__(self):
        object.__setattr__(self, "emissions", tuple(_read_only(e) for e in self.emissions))

    def __eq__(self, other):
        if not isinstance(other, HmmModel):
            return NotImplemented
        return self.hidden == other.hidden and len(self.emissions) == len(other.emissions) and all(
            np.array_equal(a, b) for a, b in zip(self.emissions, other.emissions)
        )


class Evidence:
    """Partial assignment X_A = x_A with a conditioning mode tag."""

    def __init__(self, entries=(), mode=Mode.SMOOTHING):
        items = tuple(sorted((int(j), int(x)) for j, x in dict(entries).items())) \
            if isinstance(entries, dict) else tuple(sorted((int(j), int(x)) for j, x in entries))
        indices = [j for j, _ in items]
        if len(set(indices)) != len(indices):
            raise ValueError("evidence indices must be unique")
        if any(j < 1 for j in indices):
            raise ValueError("evidence indices must be >= 1")
        self.items = items
        self.mode = Mode.coerce(mode)

    @classmethod
    def of(cls, mapping, mode=Mode.SMOOTHING) -> "Evidence":
        return cls(tuple(mapping.items()), mode)

    @classmethod
    def empty(cls, mode=Mode.SMOOTHING) -> "Evidence":
        return cls((), mode)

    @property
    def indices(self) -> tuple:
        return tuple(j for j, _ in self.items)

    def as_dict(self) -> dict:
        return dict(self.items)

    def truncated(self, j: int) -> "Evidence":
        """Evidence restricted to indices <= j (the filtering view)."""
        return Evidence(tuple((i, x) for i, x in self.items if i <= j), self.mode)

    def __len__(self):
        return len(self.items)

    def __repr__(self):
        return f"Evidence({dict(self.items)}, mode={self.mode.value})"


@dataclass(frozen=True)
class Marginal:
    """Conditional probability vector over one variable's states."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _read_only(self.probs))


@dataclass(frozen=True)
class MaxMarginal:
    """Per-state probabilities of the most probable consistent assignment.

    Entries do not sum to one; each entry is bounded by the corresponding
    smoothed marginal.
    """

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _read_only(self.values))


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_model(model: ChainModel) -> ValidationReport:
    """Check all model invariants and report violations with locations."""
    bad = []
    prior = model.prior
    if prior.ndim != 1 or prior.shape[0] < 1:
        bad.append("prior is not a nonempty vector")
    else:
        if np.any(prior < 0):
            bad.append("negative entry in prior")
        s = prior.sum()
        if abs(s - 1.0) > PROB_ATOL:
            bad.append(f"prior row sum {s:.10g}")
    d_prev = prior.shape[0] if prior.ndim == 1 else None
    for i, t in enumerate(model.transitions, start=1):
        if t.ndim != 2:
            bad.append(f"transition at step {i} is not a matrix")
            continue
        if d_prev is not None and t.shape[0] != d_prev:
            bad.append(
                f"dimension mismatch at step {i}: expected {d_prev} rows, got {t.shape[0]}"
            )
        if np.any(t < 0):
            bad.append(f"negative entry at step {i}")
        sums = t.sum(axis=1)
        for x, s in enumerate(sums):
            if abs(s - 1.0) > PROB_ATOL:
                bad.append(f"row sum {s:.10g} at step {i} (row {x})")
        d_prev = t.shape[1]
    if model.state_values is not None:
        if len(model.state_values) != model.n:
            bad.append(
                f"state_values has {len(model.state_values)} entries for {model.n} variables"
            )
        else:
            for j, v in enumerate(model.state_values, start=1):
                if v.shape != (model.domain(j),):
                    bad.append(f"state_values for variable {j} has wrong length")
    return ValidationReport(tuple(bad))


def validate_hmm(hmm: HmmModel) -> ValidationReport:
    bad = list(validate_model(hmm.hidden).violations)
    if len(hmm.emissions) != hmm.hidden.n:
        bad.append(
            f"{len(hmm.emissions)} emission matrices for {hmm.hidden.n} variables"
        )
    for i, e in enumerate(hmm.emissions, start=1):
        if i <= hmm.hidden.n and e.shape[0] != hmm.hidden.domain(i):
            bad.append(f"emission matrix at position {i} has {e.shape[0]} rows")
        if np.any(e < 0):
            bad.append(f"negative emission entry at position {i}")
        for x, s in enumerate(e.sum(axis=1)):
            if abs(s - 1.0) > PROB_ATOL:
                bad.append(f"emission row sum {s:.10g} at position {i} (row {x})")
    return ValidationReport(tuple(bad))


class _Propagation:
    """Cumulative sum-product and max-product tables over the extended chain.

    The chain is extended with single-state endpoints 0 and n+1 so every
    segment (a, b), 0 <= a < b <= n+1, is handled by one code path.
    ``M[a][b]`` is P(X_b | X_a) and ``W[a][b]`` is the max-product
    analogue (maximum over interior paths of the transition product).
    """

    def __init__(self, model: ChainModel):
        n = model.n
        d = model.domains
        steps = [model.prior.reshape(1, d[0])]
        steps.extend(model.transitions)
        steps.append(np.ones((d[n - 1], 1)))
        self.n = n
        self.dims = (1,) + d + (1,)
        m = n + 2
        self.M = [[None] * m for _ in range(m)]
        self.W = [[None] * m for _ in range(m)]
        for a in range(m):
            self.M[a][a] = np.eye(self.dims[a])
            self.W[a][a] = np.eye(self.dims[a])
        for a in range(m - 1):
            self.M[a][a + 1] = steps[a]
            self.W[a][a + 1] = steps[a]
            for b in range(a + 2, m):
                step = steps[b - 1]
                self.M[a][b] = self.M[a][b - 1] @ step
                prev = self.W[a][b - 1]
                self.W[a][b] = (prev[:, :, None] * step[None, :, :]).max(axis=1)
        # Unconditional marginals of every extended variable.
        self.marg = [self.M[0][e][0] for e in range(m)]

    def pair(self, a: int, b: int) -> np.ndarray:
        """Unconditional joint P(x_a, x_b), shape (d_a, d_b)."""
        return self.marg[a][:, None] * self.M[a][b]

    def cond3(self, a: int, j: int, b: int) -> np.ndarray:
        """P(x_j | x_a, x_b) as an array of shape (d_a, d_b, d_j).

        Endpoint combinations with zero probability get a uniform filler
        row; callers weight those combinations by zero.
        """
        num = self.M[a][j][:, None, :] * self.M[j][b].T[None, :, :]
        den = self.M[a][b][:, :, None]
        out = np.divide(num, den, out=np.full_like(num, 1.0 / num.shape[2]),
                        where=den > 0)
        return out

    def maxcond3(self, a: int, j: int, b: int) -> np.ndarray:
        """Max-marginal of X_j given endpoint states, shape (d_a, d_b, d_j).

        Entry (x_a, x_b, x_j) is the probability of the most probable full
        assignment consistent with the three pinned states, divided by
        P(x_a, x_b).
        """
        left = self.W[0][a][0]
        right = self.W[b][self.n + 1][:, 0]
        num = (left[:, None, None]
               * self.W[a][j][:, None, :]
               * self.W[j][b].T[None, :, :]
               * right[None, :, None])
        den = self.pair(a, b)[:, :, None]
        return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def _weights_from_evidence(model: ChainModel, evidence_map: dict) -> list:
    w = []
    for j in range(1, model.n + 1):
        if j in evidence_map:
            x = evidence_map[j]
            if not 0 <= x < model.domain(j):
                raise ValueError(f"evidence state {x} out of range for variable {j}")
            vec = np.zeros(model.domain(j))
            vec[x] = 1.0
            w.append(vec)
        else:
            w.append(np.ones(model.domain(j)))
    return w


def _forward_loglik(model: ChainModel, weights: list, log_space=False) -> float:
    """Log probability of the weighted evidence, -inf when annihilated."""
    if log_space:
        with np.errstate(divide="ignore"):
            logf = np.log(model.prior) + np.log(weights[0])
        total = 0.0
        for i in range(1, model.n):
            with np.errstate(divide="ignore"):
                logt = np.log(model.transitions[i - 1])
                logw = np.log(weights[i])
            logf = _logmatvec(logf, logt) + logw
            peak = logf.max()
            if peak == -np.inf:
                return -np.inf
            total += peak
            logf = logf - peak
        rest = np.logaddexp.reduce(logf)
        return total + rest if rest > -np.inf else -np.inf
    f = model.prior * weights[0]
    total = 0.0
    for i in range(1, model.n):
        z = f.sum()
        if z <= 0.0:
            return -np.inf
        total += np.log(z)
        f = (f / z) @ model.transitions[i - 1] * weights[i]
    z = f.sum()
    return total + np.log(z) if z > 0.0 else -np.inf


def _logmatvec(logv: np.ndarray, logm: np.ndarray) -> np.ndarray:
    stacked = logv[:, None] + logm
    peak = stacked.max(axis=0)
    out = np.full(logm.shape[1], -np.inf)
    finite = peak > -np.inf
    if np.any(finite):
        out[finite] = peak[finite] + np.log(
            np.exp(stacked[:, finite] - peak[finite]).sum(axis=0)
        )
    return out


def _check_evidence(model: ChainModel, evidence_map: dict, log_space=False):
    for j in evidence_map:
        if not 1 <= j <= model.n:
            raise ValueError(f"evidence index {j} out of range 1..{model.n}")
    if not evidence_map:
        return
    weights = _weights_from_evidence(model, evidence_map)
    if _forward_loglik(model, weights, log_space=log_space) == -np.inf:
        raise ZeroEvidenceError(f"evidence {evidence_map} has probability zero")


def _fold_weights(model: ChainModel, weights: list) -> ChainModel:
    """Chain whose joint is the model's joint reweighted per variable.

    Backward messages carry the aggregated downstream weight; rows that
    end up with zero posterior mass are made uniform (they are
    unreachable) so the result stays row-stochastic.
    """
    n = model.n
    back = [None] * n
    back[n - 1] = weights[n - 1].copy()
    for i in range(n - 2, -1, -1):
        msg = model.transitions[i] @ back[i + 1]
        back[i] = weights[i] * msg
        peak = back[i].max()
        if peak > 0:
            back[i] = back[i] / peak
    prior = model.prior * back[0]
    z = prior.sum()
    if z <= 0.0:
        raise ZeroEvidenceError("all probability mass annihilated by the evidence")
    prior = prior / z
    new_transitions = []
    for i in range(n - 1):
        # back[i + 1] already carries the local weight of variable i + 2.
        rows = model.transitions[i] * back[i + 1][None, :]
        sums = rows.sum(axis=1, keepdims=True)
        uniform = np.full_like(rows, 1.0 / rows.shape[1])
        rows = np.divide(rows, sums, out=uniform, where=sums > 0)
        new_transitions.append(rows)
    return ChainModel(prior, new_transitions, state_values=model.state_values)


def fold_hmm(hmm: HmmModel, observations) -> ChainModel:
    """Fold a full emission sequence into the hidden chain.

    The returned chain's joint equals P(X_1..X_n | Y = y) for the given
    emission sequence y.

    Raises
    ------
    ValueError
        If the sequence has the wrong length or an out-of-range symbol.
    ZeroEvidenceError
        If the observations have probability zero under the model.
    """
    model = hmm.hidden
    obs = list(observations)
    if len(obs) != model.n:
        raise ValueError(f"expected {model.n} observations, got {len(obs)}")
    weights = []
    for i, y in enumerate(obs, start=1):
        e = hmm.emissions[i - 1]
        if not 0 <= int(y) < e.shape[1]:
            raise ValueError(f"emission value {y} out of range at position {i}")
        weights.append(e[:, int(y)].copy())
    return _fold_weights(model, weights)


def condition_chain(model: ChainModel, evidence: Evidence) -> ChainModel:
    """Chain whose joint is P(X_V | evidence), smoothing semantics."""
    ev = evidence.as_dict()
    _check_evidence(model, ev)
    return _fold_weights(model, _weights_from_evidence(model, ev))


def _separators(evidence_map: dict, j: int, mode: Mode):
    past = [i for i in evidence_map if i < j]
    a = max(past) if past else None
    b = None
    if mode is Mode.SMOOTHING:
        future = [i for i in evidence_map if i > j]
        b = min(future) if future else None
    return a, b


def posterior_marginal(model: ChainModel, evidence: Evidence, j: int) -> Marginal:
    """Conditional marginal of variable j under the evidence.

    Conditioning uses the nearest observed ancestor (and, for smoothing,
    the nearest observed descendant); by the Markov property this equals
    conditioning on the full evidence set.  Filtering ignores evidence at
    indices greater than j.
    """
    if not 1 <= j <= model.n:
        raise ValueError(f"index {j} out of range 1..{model.n}")
    ev_full = evidence if evidence.mode is Mode.SMOOTHING else evidence.truncated(j)
    ev = ev_full.as_dict()
    _check_evidence(model, ev)
    d = model.domain(j)
    if j in ev:
        p = np.zeros(d)
        p[ev[j]] = 1.0
        return Marginal(p)
    a, b = _separators(ev, j, evidence.mode)
    f = _propagate_point(model, a, j, ev.get(a))
    if b is not None:
        g = _back_column(model, j, b, ev[b])
        p = f * g
    else:
        p = f
    z = p.sum()
    if z <= 0.0:
        raise ZeroEvidenceError(f"evidence {ev} has probability zero around variable {j}")
    return Marginal(p / z)


def _propagate_point(model, a, j, x_a):
    """P(X_j | X_a = x_a); prior propagation when a is None."""
    if a is None:
        f = model.prior.copy()
        start = 1
    else:
        f = np.zeros(model.domain(a))
        f[x_a] = 1.0
        start = a
    for i in range(start, j):
        f = f @ model.transitions[i - 1]
    return f


def _back_column(model, j, b, x_b):
    """Vector over dom(X_j) of P(X_b = x_b | X_j = .)."""
    g = np.zeros(model.domain(b))
    g[x_b] = 1.0
    for i in range(b - 1, j - 1, -1):
        g = model.transitions[i - 1] @ g
    return g


def pairwise_posterior(model: ChainModel, evidence: Evidence, a: int, b: int) -> np.ndarray:
    """Exact joint P(X_a, X_b | evidence) as a (d_a, d_b) matrix."""
    if a >= b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    if not (1 <= a and b <= model.n):
        raise ValueError(f"indices ({a}, {b}) out of range 1..{model.n}")
    ev_view = evidence if evidence.mode is Mode.SMOOTHING else evidence.truncated(b)
    if len(ev_view):
        folded = condition_chain(model, Evidence(ev_view.items, Mode.SMOOTHING))
    else:
        folded = model
    p_a = _propagate_point(folded, None, a, None)
    band = np.eye(folded.domain(a))
    for i in range(a, b):
        band = band @ folded.transitions[i - 1]
    return p_a[:, None] * band


def max_marginal(model: ChainModel, evidence: Evidence, j: int) -> MaxMarginal:
    """Per-state maxima over full assignments consistent with the evidence.

    Entry x is max over assignments x_V with X_j = x of P(x_V | evidence).
    Filtering truncates the evidence to indices <= j first.
    """
    if not 1 <= j <= model.n:
        raise ValueError(f"index {j} out of range 1..{model.n}")
    ev_view = evidence if evidence.mode is Mode.SMOOTHING else evidence.truncated(j)
    ev = ev_view.as_dict()
    _check_evidence(model, ev)
    weights = _weights_from_evidence(model, ev)
    n = model.n
    # Forward max-product message including the weight at each step.
    logf_scale = 0.0
    f = model.prior * weights[0]
    fwd = [None] * n
    fwd[0] = (f, 0.0)
    for i in range(1, n):
        f, s = fwd[i - 1]
        nxt = (f[:, None] * model.transitions[i - 1]).max(axis=0) * weights[i]
        peak = nxt.max()
        if peak > 0:
            fwd[i] = (nxt / peak, s + np.log(peak))
        else:
            fwd[i] = (nxt, s)
    bwd = [None] * n
    bwd[n - 1] = (np.ones(model.domain(n)), 0.0)
    for i in range(n - 2, -1, -1):
        g, s = bwd[i + 1]
        prv = (model.transitions[i] * (weights[i + 1] * g)[None, :]).max(axis=1)
        peak = prv.max()
        if peak > 0:
            bwd[i] = (prv / peak, s + np.log(peak))
        else:
            bwd[i] = (prv, s)
    loglik = _forward_loglik(model, weights)
    f, sf = fwd[j - 1]
    g, sg = bwd[j - 1]
    vals = f * g
    out = np.zeros_like(vals)
    pos = vals > 0
    out[pos] = np.exp(np.log(vals[pos]) + sf + sg - loglik)
    return MaxMarginal(out)


def sample(model: ChainModel, rng, size=None) -> np.ndarray:
    """Draw full assignments by ancestral sampling.

    Returns a vector of n states, or a (size, n) matrix when ``size`` is
    given.  Deterministic for a fixed ``numpy.random.Generator`` state.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    m = 1 if size is None else int(size)
    n = model.n
    out = np.empty((m, n), dtype=np.int64)
    u = rng.random((m, n))
    cdf = np.cumsum(model.prior)
    out[:, 0] = np.searchsorted(cdf, u[:, 0], side="right")
    for i in range(1, n):
        t_cdf = np.cumsum(model.transitions[i - 1], axis=1)
        rows = t_cdf[out[:, i - 1]]
        out[:, i] = (u[:, i][:, None] > rows).sum(axis=1)
    np.clip(out, 0, np.array(model.domains) - 1, out=out)
    return out[0] if size is None else out
