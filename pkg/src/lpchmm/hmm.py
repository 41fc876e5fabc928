"""Discrete hidden Markov models with a non-emitting initial state.

A model is the triple (pi, A, B). The chain starts in q_0 ~ pi, which
emits nothing; each later state q_t (t = 1..T) is entered through A and
emits o_t through B. A state sequence therefore has T + 1 entries for T
observations, and

    P(O, q) = pi[q_0] * prod_t A[q_{t-1}, q_t] * B[q_t, o_t].

The more common convention that lets the first state emit corresponds to an
initial distribution pi' = pi @ A.

Observation and state sequences are plain 1-D integer arrays. Lattices are
indexed by t = 0..T, so row 0 always belongs to the silent initial state.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    EmptyTrainingSet,
    IndexOutOfRange,
    InvalidModel,
    LengthMismatch,
    NumericError,
    SequenceTooLong,
    SymbolOutOfRange,
    UsageError,
)

log = logging.getLogger(__name__)

STOCHASTIC_ATOL = 1e-9
EMISSION_FLOOR = 1e-6
DIRECT_MAX_PATHS = 10**7


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def _log(a):
    with np.errstate(divide="ignore"):
        return np.log(a)


def _lse(a, axis):
    """logsumexp along ``axis`` that tolerates all -inf slices."""
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis)


@dataclass(frozen=True)
class HmmModel:
    pi: np.ndarray
    trans: np.ndarray
    emit: np.ndarray
    # log-parameters, derived once
    log_pi: np.ndarray = field(init=False, repr=False, compare=False)
    log_trans: np.ndarray = field(init=False, repr=False, compare=False)
    log_emit: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pi, trans, emit = _frozen(self.pi), _frozen(self.trans), _frozen(self.emit)
        n = pi.size
        if pi.ndim != 1 or n < 1:
            raise InvalidModel("pi must be a non-empty vector")
        if trans.shape != (n, n):
            raise InvalidModel(f"trans must be {n}x{n}, got {trans.shape}")
        if emit.ndim != 2 or emit.shape[0] != n or emit.shape[1] < 1:
            raise InvalidModel(f"emit must be {n}xM, got {emit.shape}")
        for name, a in (("pi", pi), ("trans", trans), ("emit", emit)):
            if not np.all(np.isfinite(a)) or np.any(a < 0):
                raise InvalidModel(f"{name} entries must be finite and non-negative")
            sums = a.sum(axis=-1)
            if np.any(np.abs(sums - 1.0) > STOCHASTIC_ATOL):
                raise InvalidModel(f"{name} rows must sum to 1 (got {np.ravel(sums).tolist()})")
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "trans", trans)
        object.__setattr__(self, "emit", emit)
        object.__setattr__(self, "log_pi", _frozen(_log(pi)))
        object.__setattr__(self, "log_trans", _frozen(_log(trans)))
        object.__setattr__(self, "log_emit", _frozen(_log(emit)))

    @property
    def n_states(self):
        return self.pi.size

    @property
    def n_symbols(self):
        return self.emit.shape[1]

    def __eq__(self, other):
        if not isinstance(other, HmmModel):
            return NotImplemented
        return (np.array_equal(self.pi, other.pi) and np.array_equal(self.trans, other.trans)
                and np.array_equal(self.emit, other.emit))

    __hash__ = None


@dataclass(frozen=True)
class ForwardLattice:
    log_alpha: np.ndarray
    log_likelihood: float

    @property
    def likelihood(self):
        return float(np.exp(self.log_likelihood))


# ---------------------------------------------------------------------------
# construction helpers


def topology_mask(n_states, topology="ergodic"):
    """Allowed-transition mask: ``ergodic`` (all arcs) or ``left-to-right`` (self and next)."""
    if n_states < 1:
        raise UsageError(f"n_states must be >= 1, got {n_states}")
    if topology == "ergodic":
        return np.ones((n_states, n_states), dtype=bool)
    if topology == "left-to-right":
        i = np.arange(n_states)
        mask = np.zeros((n_states, n_states), dtype=bool)
        mask[i, i] = True
        mask[i[:-1], i[:-1] + 1] = True
        return mask
    raise UsageError(f"unknown topology {topology!r}")


def initial_model(n_states, n_symbols, mask=None, seed=0) -> HmmModel:
    """Training start point.

    Uniform pi, uniform transitions over the allowed arcs, and uniform
    emissions perturbed by up to +/-1% seeded noise so states can separate.
    """
    if n_symbols < 1:
        raise UsageError(f"n_symbols must be >= 1, got {n_symbols}")
    mask = topology_mask(n_states) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != (n_states, n_states) or not np.all(mask.any(axis=1)):
        raise UsageError("transition mask must be NxN with at least one arc per row")
    rng = np.random.default_rng(seed)
    trans = mask / mask.sum(axis=1, keepdims=True)
    emit = 1.0 + 0.01 * rng.uniform(-1.0, 1.0, size=(n_states, n_symbols))
    emit /= emit.sum(axis=1, keepdims=True)
    return HmmModel(np.full(n_states, 1.0 / n_states), trans, emit)


def segmental_initial_model(n_states, n_symbols, sequences, mask=None, seed=0) -> HmmModel:
    """Training start point seeded from the data.

    Every sequence is cut into ``n_states`` consecutive, equal-length
    segments; state i starts from the add-one smoothed symbol histogram of
    segment i, with +/-1% seeded noise. pi and the transitions are uniform
    over the allowed arcs as in :func:`initial_model`.
    """
    base = initial_model(n_states, n_symbols, mask, seed)
    counts = np.ones((n_states, n_symbols))
    for o in sequences:
        o = np.asarray(o, dtype=np.int64)
        seg = np.minimum((np.arange(o.size) * n_states) // max(o.size, 1), n_states - 1)
        np.add.at(counts, (seg, o), 1.0)
    rng = np.random.default_rng(seed)
    emit = counts * (1.0 + 0.01 * rng.uniform(-1.0, 1.0, size=counts.shape))
    emit /= emit.sum(axis=1, keepdims=True)
    return HmmModel(base.pi, base.trans, emit)


def random_model(n_states, n_symbols, rng) -> HmmModel:
    """Dirichlet(1) rows throughout; for tests and benchmarks."""
    return HmmModel(
        rng.dirichlet(np.ones(n_states)),
        rng.dirichlet(np.ones(n_states), size=n_states),
        rng.dirichlet(np.ones(n_symbols), size=n_states),
    )


# ---------------------------------------------------------------------------
# validation


def _obs(model, obs):
    o = np.asarray(obs)
    if o.ndim != 1 or o.size < 1:
        raise LengthMismatch("observation sequence must be a non-empty 1-D sequence")
    if not np.issubdtype(o.dtype, np.integer):
        if not np.all(np.mod(o, 1) == 0):
            raise SymbolOutOfRange("observation symbols must be integers")
        o = o.astype(np.int64)
    if o.min() < 0 or o.max() >= model.n_symbols:
        raise SymbolOutOfRange(f"symbols must lie in [0, {model.n_symbols}), got [{o.min()}, {o.max()}]")
    return o


def _states(model, q):
    q = np.asarray(q, dtype=np.int64)
    if q.ndim != 1 or q.size < 1:
        raise LengthMismatch("state sequence must be a non-empty 1-D sequence")
    if q.min() < 0 or q.max() >= model.n_states:
        raise IndexOutOfRange(f"states must lie in [0, {model.n_states})")
    return q


# ---------------------------------------------------------------------------
# probabilities of given paths


def state_sequence_probability(model: HmmModel, q):
    """P(q | A, pi) = pi[q_0] * prod_t A[q_{t-1}, q_t]."""
    q = _states(model, q)
    return float(model.pi[q[0]] * np.prod(model.trans[q[:-1], q[1:]]))


def emission_probability(model: HmmModel, q, obs):
    """P(O | q, B) = prod_{t>=1} B[q_t, o_t]; q_0 emits nothing."""
    q, o = _states(model, q), _obs(model, obs)
    if q.size != o.size + 1:
        raise LengthMismatch(f"need {o.size + 1} states for {o.size} observations, got {q.size}")
    return float(np.prod(model.emit[q[1:], o]))


def joint_probability(model: HmmModel, q, obs):
    """P(O, q) as a linear-domain product."""
    q, o = _states(model, q), _obs(model, obs)
    if q.size != o.size + 1:
        raise LengthMismatch(f"need {o.size + 1} states for {o.size} observations, got {q.size}")
    return float(model.pi[q[0]] * np.prod(model.trans[q[:-1], q[1:]] * model.emit[q[1:], o]))


def all_state_sequences(n_states, length, chunk=1 << 15):
    """Yield every state sequence of ``length`` as row blocks of an int array."""
    total = n_states ** length
    shape = (n_states,) * length
    for lo in range(0, total, chunk):
        flat = np.arange(lo, min(total, lo + chunk))
        yield np.stack(np.unravel_index(flat, shape), axis=1)


def evaluate_direct(model: HmmModel, obs, max_paths=DIRECT_MAX_PATHS):
    """P(O | lambda) by summing the joint probability over all N^(T+1) paths.

    Exponential in T; meant as a reference for the trellis algorithms.
    """
    o = _obs(model, obs)
    n_paths = model.n_states ** (o.size + 1)
    if n_paths > max_paths:
        raise SequenceTooLong(f"{n_paths} state sequences exceed the limit of {max_paths}")
    total = 0.0
    for q in all_state_sequences(model.n_states, o.size + 1):
        p = model.pi[q[:, 0]] * np.prod(model.trans[q[:, :-1], q[:, 1:]] * model.emit[q[:, 1:], o], axis=1)
        total += float(p.sum())
    return total


# ---------------------------------------------------------------------------
# trellis algorithms


def _padded_log_emissions(model, sequences):
    """Per-sequence log B[:, o_t] stacked to (B, Tmax, N).

    Positions past a sequence's end get log-emission 0. Rows of A sum to
    one, so these steps leave the forward mass unchanged and keep the
    backward variables at 1: every sequence's likelihood and lattice rows
    up to its own length are exactly those of an unpadded run.
    """
    lengths = np.array([o.size for o in sequences])
    le = np.zeros((len(sequences), lengths.max(), model.n_states))
    for b, o in enumerate(sequences):
        le[b, : o.size] = model.log_emit.T[o]
    return le, lengths


def _step_forward(prev, a):
    # logsumexp_i(prev[:, i] + log a[i, j]) with the max shift factored out
    m = prev.max(axis=1, keepdims=True)
    m = np.where(m == -np.inf, 0.0, m)
    return np.log((np.exp(prev - m)[:, :, None] * a[None, :, :]).sum(axis=1)) + m


def _step_backward(nxt, a):
    m = nxt.max(axis=1, keepdims=True)
    m = np.where(m == -np.inf, 0.0, m)
    return np.log((a[None, :, :] * np.exp(nxt - m)[:, None, :]).sum(axis=2)) + m


def _forward_batch(model, le):
    n_seq, t_max, n = le.shape
    la = np.empty((n_seq, t_max + 1, n))
    la[:, 0] = model.log_pi
    with np.errstate(divide="ignore", invalid="ignore"):
        for t in range(1, t_max + 1):
            la[:, t] = _step_forward(la[:, t - 1], model.trans) + le[:, t - 1]
    return la


def _backward_batch(model, le):
    n_seq, t_max, n = le.shape
    lb = np.zeros((n_seq, t_max + 1, n))
    with np.errstate(divide="ignore", invalid="ignore"):
        for t in range(t_max - 1, -1, -1):
            lb[:, t] = _step_backward(le[:, t] + lb[:, t + 1], model.trans)
    return lb


def forward(model: HmmModel, obs) -> ForwardLattice:
    """Log-domain forward recursion.

    ``log_alpha[0] = log pi`` and
    ``log_alpha[t, j] = logsumexp_i(log_alpha[t-1, i] + log A[i, j]) + log B[j, o_t]``;
    the log-likelihood is the logsumexp of the last row.
    """
    o = _obs(model, obs)
    le, _ = _padded_log_emissions(model, [o])
    la = _forward_batch(model, le)[0]
    la.setflags(write=False)
    return ForwardLattice(la, float(_lse(la[-1], axis=0)))


def log_likelihoods(model: HmmModel, sequences):
    """log P(O | lambda) for many sequences at once, trellis run in lockstep."""
    seqs = [_obs(model, o) for o in sequences]
    if not seqs:
        return np.zeros(0)
    le, _ = _padded_log_emissions(model, seqs)
    return _lse(_forward_batch(model, le)[:, -1], axis=1)


def backward(model: HmmModel, obs):
    """Log backward variables, shape (T+1, N), with row T equal to zero."""
    o = _obs(model, obs)
    le, _ = _padded_log_emissions(model, [o])
    lb = _backward_batch(model, le)[0]
    lb.setflags(write=False)
    return lb


def posteriors(model: HmmModel, obs):
    """State posteriors gamma[t, i] = P(q_t = i | O) for t = 0..T."""
    fw = forward(model, obs)
    if not np.isfinite(fw.log_likelihood):
        raise NumericError("observation sequence has zero probability under the model")
    return np.exp(fw.log_alpha + backward(model, obs) - fw.log_likelihood)


def posterior_decode(model: HmmModel, obs):
    """Pick the individually most probable state at every t (lowest index on ties)."""
    fw = forward(model, obs)
    score = fw.log_alpha + backward(model, obs)
    return np.argmax(score, axis=1).astype(np.int64)


def viterbi(model: HmmModel, obs) -> Tuple[np.ndarray, float]:
    """Most probable state sequence q_0..q_T and its log joint probability."""
    o = _obs(model, obs)
    T, n = o.size, model.n_states
    lt, le = model.log_trans, model.log_emit
    delta = model.log_pi.copy()
    back = np.zeros((T + 1, n), dtype=np.int64)
    for t in range(1, T + 1):
        scores = delta[:, None] + lt
        back[t] = np.argmax(scores, axis=0)
        delta = scores[back[t], np.arange(n)] + le[:, o[t - 1]]
    q = np.empty(T + 1, dtype=np.int64)
    q[T] = int(np.argmax(delta))
    for t in range(T, 0, -1):
        q[t - 1] = back[t, q[t]]
    return q, float(delta[q[T]])


# ---------------------------------------------------------------------------
# training


def floor_distribution(counts, floor=EMISSION_FLOOR):
    """Maximize sum_k c_k log b_k subject to sum b = 1 and every b_k >= floor.

    The optimum is ``max(floor, c_k / lam)``: entries that would fall under
    the floor are pinned there and the remaining mass is renormalized over
    the others. Works row-wise on 2-D input.
    """
    c = np.array(counts, dtype=np.float64)
    if c.ndim == 2:
        return np.vstack([floor_distribution(row, floor) for row in c])
    m = c.size
    if floor * m >= 1.0:
        raise UsageError(f"floor {floor} too large for {m} symbols")
    if c.max() > 0.0:
        # the optimum is scale-invariant in c; rescaling avoids subnormal arithmetic
        c = c / c.max()
    pinned = np.zeros(m, dtype=bool)
    while True:
        free = ~pinned
        free_mass = c[free].sum()
        b = np.full(m, floor)
        if free_mass <= 0.0:
            # no evidence outside the pinned set; spread what is left evenly
            b[free] = (1.0 - floor * pinned.sum()) / max(1, free.sum())
            return b
        b[free] = c[free] / free_mass * (1.0 - floor * pinned.sum())
        low = free & (b < floor)
        if not low.any():
            return b
        pinned |= low


@dataclass
class _Stats:
    log_likelihood: float
    pi: np.ndarray
    trans: np.ndarray
    emit: np.ndarray


def _estep(model: HmmModel, sequences) -> _Stats:
    n, m = model.n_states, model.n_symbols
    le, lengths = _padded_log_emissions(model, sequences)
    la = _forward_batch(model, le)
    lb = _backward_batch(model, le)
    ll = _lse(la[:, -1], axis=1)
    if not np.all(np.isfinite(ll)):
        raise NumericError("training sequence has zero probability under the current model")
    t_max = le.shape[1]
    # valid[b, t] marks observation steps t = 1..T_b
    valid = np.arange(1, t_max + 1)[None, :] <= lengths[:, None]

    gamma = np.exp(la + lb - ll[:, None, None])
    # xi[b, t-1, i, j] for q_{t-1}=i -> q_t=j
    with np.errstate(divide="ignore"):
        lxi = (la[:, :-1, :, None] + model.log_trans[None, None]
               + (le + lb[:, 1:])[:, :, None, :] - ll[:, None, None, None])
    xi = np.exp(lxi) * valid[:, :, None, None]
    emit_acc = np.zeros((m, n))
    for b, o in enumerate(sequences):
        np.add.at(emit_acc, o, gamma[b, 1 : o.size + 1])
    return _Stats(float(ll.sum()), gamma[:, 0].sum(axis=0), xi.sum(axis=(0, 1)), emit_acc.T)


def _mstep(model: HmmModel, stats: _Stats, mask, floor) -> HmmModel:
    pi = stats.pi / stats.pi.sum()

    trans = model.trans.copy()
    acc = np.where(mask, stats.trans, 0.0)
    rows = acc.sum(axis=1)
    used = rows > 0
    trans[used] = acc[used] / rows[used, None]

    emit = model.emit.copy()
    occ = stats.emit.sum(axis=1)
    for i in np.flatnonzero(occ > 0):
        emit[i] = floor_distribution(stats.emit[i], floor) if floor > 0 else stats.emit[i] / occ[i]
    return HmmModel(pi, trans, emit)


def baum_welch(model: HmmModel, training: Sequence, max_iters=100, tol=1e-4,
               floor=EMISSION_FLOOR, mask=None, callback=None) -> Tuple[HmmModel, List[float]]:
    """Multi-sequence Baum-Welch re-estimation.

    pi is re-estimated from the posteriors at t = 0, transitions from the
    expected transition counts over t = 1..T, and emissions from the
    posteriors at t = 1..T only. Emission rows are kept at or above
    ``floor``; the start model is projected onto that set first, which
    keeps the likelihood trace non-decreasing. Arcs outside ``mask`` (or
    already zero in the start model) stay at zero. ``callback``, if given,
    is called as ``callback(iteration, model, log_likelihood)`` after every
    iteration.

    Returns
    -------
    model : HmmModel
        The final re-estimated model.
    trace : list of float
        Total training log-likelihood of the start model followed by that
        of the model after every iteration.
    """
    if max_iters < 1:
        raise UsageError(f"max_iters must be >= 1, got {max_iters}")
    if not tol > 0:
        raise UsageError(f"tol must be > 0, got {tol}")
    sequences = [_obs(model, o) for o in training]
    if not sequences:
        raise EmptyTrainingSet("no training sequences")
    mask = model.trans > 0 if mask is None else (np.asarray(mask, dtype=bool) & (model.trans > 0))

    if floor > 0:
        model = HmmModel(model.pi, model.trans, floor_distribution(model.emit, floor))
    stats = _estep(model, sequences)
    trace = [stats.log_likelihood]
    for _ in range(max_iters):
        model = _mstep(model, stats, mask, floor)
        stats = _estep(model, sequences)
        trace.append(stats.log_likelihood)
        if callback is not None:
            callback(len(trace) - 1, model, trace[-1])
        gain = trace[-1] - trace[-2]
        if gain < -1e-9:
            log.warning("log-likelihood decreased by %.3e", -gain)
        if gain < tol:
            break
    return model, trace


def sample(model: HmmModel, length, seed=0) -> Tuple[np.ndarray, np.ndarray]:
    """Draw (q_0..q_T, o_1..o_T) from the model."""
    if length < 1:
        raise UsageError(f"length must be >= 1, got {length}")
    rng = np.random.default_rng(seed)
    u = rng.random(2 * length + 1)
    cum_pi = np.cumsum(model.pi)
    cum_a = np.cumsum(model.trans, axis=1)
    cum_b = np.cumsum(model.emit, axis=1)
    n, m = model.n_states, model.n_symbols
    q = np.empty(length + 1, dtype=np.int64)
    o = np.empty(length, dtype=np.int64)
    q[0] = min(int(np.searchsorted(cum_pi, u[0], side="right")), n - 1)
    for t in range(1, length + 1):
        q[t] = min(int(np.searchsorted(cum_a[q[t - 1]], u[2 * t - 1], side="right")), n - 1)
        o[t - 1] = min(int(np.searchsorted(cum_b[q[t]], u[2 * t], side="right")), m - 1)
    return q, o
