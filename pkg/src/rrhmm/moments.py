"""Empirical and population moment estimates (unigram, bigram, trigram slices).

Past and future events are either single symbols or, for systems that are
not 1-step observable, non-overlapping blocks of ``window`` consecutive
symbols. The middle observation is always a single base symbol.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_symbols, check_triples
from .exceptions import EventSpaceTooLarge, SequenceTooShort
from .hmm import stacked_observation_matrix

MAX_EVENTS = 10_000


@dataclass(frozen=True)
class EventSpace:
    """Lexicographic encoding of ``window``-tuples over ``n_base`` symbols."""

    n_base: int
    window: int = 1

    def __post_init__(self):
        if self.n_base < 1 or self.window < 1:
            raise ValueError("n_base and window must be positive")

    @property
    def n_events(self):
        return self.n_base ** self.window

    def encode(self, symbols):
        """Event index of a tuple, or of each row of an (..., window) array."""
        arr = np.asarray(symbols, dtype=np.int64)
        if arr.shape[-1] != self.window:
            raise ValueError(f"expected tuples of length {self.window}")
        powers = self.n_base ** np.arange(self.window - 1, -1, -1, dtype=np.int64)
        codes = arr @ powers
        return int(codes) if codes.ndim == 0 else codes

    def decode(self, index):
        index = int(index)
        if not 0 <= index < self.n_events:
            raise ValueError(f"event index {index} out of range")
        out = []
        for _ in range(self.window):
            index, r = divmod(index, self.n_base)
            out.append(r)
        return tuple(reversed(out))

    def block_codes(self, seq):
        """Code of the block starting at every position of ``seq``."""
        seq = np.asarray(seq, dtype=np.int64)
        if seq.size < self.window:
            return np.zeros(0, dtype=np.int64)
        return self.encode(np.lib.stride_tricks.sliding_window_view(seq, self.window))


@dataclass(frozen=True)
class MomentEstimates:
    """``P1[j]`` past-event marginal, ``P21[i, j]`` (future i, past j) and
    ``P3[x][i, j]`` (future i, middle symbol x, past j).

    ``sample_count`` is ``math.inf`` for exact population moments.
    """

    P1: np.ndarray
    P21: np.ndarray
    P3: np.ndarray
    sample_count: float
    event_space: EventSpace

    @property
    def n_base(self):
        return self.event_space.n_base

    @property
    def window(self):
        return self.event_space.window

    @property
    def is_population(self):
        return math.isinf(self.sample_count)

    def to_dict(self):
        return {"n": self.n_base, "window": self.window,
                "N": None if self.is_population else int(self.sample_count),
                "P1": self.P1.tolist(), "P21": self.P21.tolist(),
                "P3": self.P3.tolist()}

    @classmethod
    def from_dict(cls, d):
        N = math.inf if d.get("N") is None else d["N"]
        return cls(np.array(d["P1"], float), np.array(d["P21"], float),
                   np.array(d["P3"], float), N,
                   EventSpace(int(d["n"]), int(d.get("window", 1))))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _from_codes(past, middle, fut2, fut3, space):
    """Normalize integer co-occurrence counts into a MomentEstimates."""
    ne, nb = space.n_events, space.n_base
    N = past.size
    c1 = np.bincount(past, minlength=ne)
    c21 = np.bincount(fut2 * ne + past, minlength=ne * ne).reshape(ne, ne)
    c3 = np.bincount((middle * ne + fut3) * ne + past,
                     minlength=nb * ne * ne).reshape(nb, ne, ne)
    return MomentEstimates(c1 / N, c21 / N, c3 / N, N, space)


def estimate_moments(data, n):
    """Moments of i.i.d. (or sliding) triples ``(x1, x2, x3)``.

    Examples
    --------
    >>> m = estimate_moments([[0, 1, 2]], 3)
    >>> m.P21[1, 0], m.P3[1][2, 0]
    (1.0, 1.0)
    """
    data = check_triples(data, n)
    space = EventSpace(n, 1)
    return _from_codes(data[:, 0], data[:, 1], data[:, 1], data[:, 2], space)


def estimate_moments_stacked(sequence, n, window=1):
    """Moments from one sequence with ``window``-length past/future blocks.

    At every position ``t`` with a full neighbourhood the past event is
    ``x[t-w:t]``, the middle symbol ``x[t]`` and the trigram future event
    ``x[t+1:t+w+1]``; the bigram pairs the block ``x[t:t+w]`` with the same
    past block. Windows slide by one.
    """
    if window > 1 and n ** window > MAX_EVENTS:
        raise EventSpaceTooLarge(f"{n}**{window} events exceeds {MAX_EVENTS}")
    seq = check_symbols(sequence, n)
    w = int(window)
    if seq.size < 2 * w + 1:
        raise SequenceTooShort(
            f"need at least {2 * w + 1} symbols for window {w}, got {seq.size}")
    space = EventSpace(n, w)
    codes = space.block_codes(seq)
    t = np.arange(w, seq.size - w)
    return _from_codes(codes[t - w], seq[t], codes[t], codes[t + 1], space)


def population_moments(params):
    """Infinite-sample moments computed from the latent parameters."""
    O, T, pi = params.O, params.T, params.pi
    back = T @ (pi[:, None] * O.T)  # T diag(pi) O^T
    P21 = O @ back
    P3 = np.stack([O @ (params.A(x) @ back) for x in range(params.n)])
    return MomentEstimates(O @ pi, P21, P3, math.inf, EventSpace(params.n, 1))


def population_moments_stacked(params, window):
    """Exact stacked moments by summing over hidden paths; a test oracle.

    The past block starts from the prior ``pi``.
    """
    n, m = params.n, params.m
    if n ** window > MAX_EVENTS:
        raise EventSpaceTooLarge(f"{n}**{window} events exceeds {MAX_EVENTS}")
    # F[j, b] = Pr[past block = j, state at its last symbol = b]
    F = params.pi[None, :]
    for step in range(window):
        if step:
            F = F @ params.T.T
        F = (F[:, None, :] * params.O[None, :, :]).reshape(-1, m)
    Ob = stacked_observation_matrix(params, window)
    back = params.T @ F.T
    P21 = Ob @ back
    P3 = np.stack([Ob @ (params.A(x) @ back) for x in range(n)])
    return MomentEstimates(F.sum(axis=1), P21, P3, math.inf, EventSpace(n, window))
