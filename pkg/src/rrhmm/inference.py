"""Filtering, prediction and simulation in the k-dimensional observable space.

Every update is one ``k x k`` matrix-vector product and one dot product;
nothing here depends on the number of latent states.
"""

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._random import make_rng
from ._validation import check_symbols
from .exceptions import DegenerateDenominator, SequenceSpaceTooLarge

DEFAULT_DISTRUST_HORIZON = 5
MAX_ENUMERATED = 100_000


@dataclass(frozen=True)
class BeliefState:
    """Internal state ``b_t`` plus filtering health flags.

    ``b`` is a linear transform of the latent belief, not a distribution.
    ``distrust_remaining`` counts down the steps still untrusted after a
    normalizer underflow.
    """

    b: np.ndarray
    step: int = 1
    underflow_count: int = 0
    distrust_remaining: int = 0
    last_normalizer: float = float("nan")

    @property
    def trust(self):
        return self.distrust_remaining == 0


class SequenceProbability(NamedTuple):
    raw: float
    value: float


class Prediction(NamedTuple):
    probs: np.ndarray
    raw: np.ndarray


def init_belief(model):
    return BeliefState(b=model.b1.copy())


def seq_prob(model, seq):
    """``b_inf^T B_{x_t} ... B_{x_1} b1``; ``value`` is clamped to [0, 1]."""
    seq = check_symbols(seq, model.n)
    b = model.b1
    for x in seq:
        b = model.B[x] @ b
    raw = float(model.b_inf @ b)
    return SequenceProbability(raw, min(max(raw, 0.0), 1.0))


def filter_update(model, state, x, distrust_horizon=DEFAULT_DISTRUST_HORIZON):
    """Condition the internal state on symbol ``x``."""
    return _apply_operator(model, state, model.B[x], distrust_horizon)


def _apply_operator(model, state, Bx, distrust_horizon):
    v = Bx @ state.b
    z = float(model.b_inf @ v)
    floor = model.normalizer_floor
    remaining = max(state.distrust_remaining - 1, 0)
    underflows = state.underflow_count
    if not np.isfinite(z) or z < floor:
        with np.errstate(over="ignore", invalid="ignore"):
            v = v / floor
        underflows += 1
        remaining = int(distrust_horizon)
    else:
        v = v / z
    if not np.all(np.isfinite(v)):
        v = np.nan_to_num(v, nan=0.0, posinf=0.0, neginf=0.0)
    return BeliefState(v, state.step + 1, underflows, remaining, z)


def filter_sequence(model, seq, state=None, distrust_horizon=DEFAULT_DISTRUST_HORIZON):
    """Run :func:`filter_update` over ``seq``; returns the list of states
    (the initial state first)."""
    seq = check_symbols(seq, model.n)
    state = init_belief(model) if state is None else state
    states = [state]
    for x in seq:
        state = filter_update(model, state, int(x), distrust_horizon)
        states.append(state)
    return states


def _predict_from(model, b):
    raw = np.einsum("j,xjk,k->x", model.b_inf, model.B, b)
    denom = raw.sum()
    if not np.isfinite(denom) or denom < model.normalizer_floor:
        raise DegenerateDenominator(
            f"predictive normalizer {denom:.3e} below floor {model.normalizer_floor:.1e}")
    clamped = np.maximum(raw, 0.0)
    total = clamped.sum()
    if total <= 0:
        raise DegenerateDenominator("all predictive numerators are non-positive")
    return Prediction(clamped / total, raw / denom)


def predictive(model, state):
    """One-step predictive distribution over all base symbols."""
    return _predict_from(model, state.b)


def cond_prob(model, state, x):
    """``Pr[x_t = x | x_{1:t-1}]`` as (clamped probability, raw ratio)."""
    pred = predictive(model, state)
    return float(pred.probs[x]), float(pred.raw[x])


def predict_t_ahead(model, state, horizon):
    """Distribution of the symbol ``horizon`` steps ahead (1 = next step)."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    b = state.b
    Bsum = model.B_sum
    for _ in range(horizon - 1):
        b = Bsum @ b
    return _predict_from(model, b).probs


class Simulation(NamedTuple):
    symbols: np.ndarray
    completed: bool


def simulate(model, length, seed=None, distrust_horizon=DEFAULT_DISTRUST_HORIZON):
    """Sample a sequence by alternating prediction and filtering.

    Stops early (``completed=False``) if the predictive distribution
    degenerates, returning what was generated so far.
    """
    rng = make_rng(seed)
    state = init_belief(model)
    out = np.zeros(int(length), dtype=np.int64)
    u = rng.random(int(length))
    for t in range(int(length)):
        try:
            probs = predictive(model, state).probs
        except DegenerateDenominator:
            return Simulation(out[:t], False)
        x = int(min(np.searchsorted(np.cumsum(probs), u[t], side="right"), model.n - 1))
        out[t] = x
        state = filter_update(model, state, x, distrust_horizon)
    return Simulation(out, True)


def all_sequence_probs(model, t):
    """Raw probabilities of all ``n**t`` sequences in lexicographic order."""
    if model.n ** t > MAX_ENUMERATED:
        raise SequenceSpaceTooLarge(f"{model.n}**{t} sequences exceeds {MAX_ENUMERATED}")
    V = model.b1[None, :]
    for _ in range(t):
        V = np.einsum("xij,sj->sxi", model.B, V).reshape(-1, model.k)
    return V @ model.b_inf


TRACE_FIELDS = ["step", "symbol", "normalizer", "trust"]


def filter_trace(model, seq, distrust_horizon=DEFAULT_DISTRUST_HORIZON):
    """Rows of (step, symbol, normalizer, trust, predictive distribution).

    The predictive columns hold the distribution the symbol was drawn
    against, i.e. the prediction made before the update.
    """
    seq = check_symbols(seq, model.n)
    state = init_belief(model)
    rows = []
    for x in seq:
        try:
            probs = predictive(model, state).probs
        except DegenerateDenominator:
            probs = np.full(model.n, np.nan)
        state = filter_update(model, state, int(x), distrust_horizon)
        rows.append((state.step - 1, int(x), state.last_normalizer, state.trust, probs))
    return rows


def write_trace(rows, path, n):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_FIELDS + [f"p{i}" for i in range(n)])
        for step, x, z, trust, probs in rows:
            w.writerow([step, x, repr(float(z)), int(trust)] + [repr(float(p)) for p in probs])


def read_trace(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        n = len(header) - len(TRACE_FIELDS)
        rows = []
        for row in r:
            rows.append((int(row[0]), int(row[1]), float(row[2]), bool(int(row[3])),
                         np.array([float(v) for v in row[4:4 + n]])))
    return rows
