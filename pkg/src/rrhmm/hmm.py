"""Exact reduced-rank HMMs: construction, validation, sampling and the
forward-algorithm oracle used to check everything learned from data.

Symbols and states are 0-based throughout.
"""

import json
import logging
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from ._random import categorical_columns, make_rng
from ._validation import (RANK_TOL, STOCHASTIC_TOL, check_column_stochastic,
                          check_symbols, kth_singular_value, numerical_rank)
from .exceptions import (InconsistentFactorization, NoConvergence,
                         NonStationaryPrior, NotStochastic, RankMismatch,
                         ZeroProbabilitySequence)

logger = logging.getLogger(__name__)

RECONSTRUCTION_TOL = 1e-10
LOW_RANK_ROUTE_TOL = 1e-10
PRIOR_RANGE_TOL = 1e-8


def factorize_transition(T, k, tol=RANK_TOL):
    """Split a rank-``k`` transition matrix as ``T = R @ S``.

    Uses the thin SVD ``R = U_k diag(s_k)``, ``S = V_k^T`` and then moves
    the scale ``c = ||R||_1`` over to ``S`` so that ``||R||_1 <= 1``.

    Parameters
    ----------
    T : (m, m) array_like
        Column-stochastic transition matrix.
    k : int
        Expected rank.
    tol : float
        Relative singular value threshold used to decide the numerical rank.

    Returns
    -------
    R : (m, k) ndarray
    S : (k, m) ndarray
    """
    T = check_column_stochastic(T, "T")
    rank = numerical_rank(T, tol)
    if rank != k:
        raise RankMismatch(f"T has numerical rank {rank}, requested k={k}")
    U, s, Vt = np.linalg.svd(T)
    R = U[:, :k] * s[:k]
    S = Vt[:k]
    c = np.linalg.norm(R, 1)
    R, S = R / c, S * c
    err = np.max(np.abs(R @ S - T))
    if err > RECONSTRUCTION_TOL:
        raise RankMismatch(f"rank-{k} reconstruction error {err:.3e}")
    return R, S


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RrHmmParams:
    """Ground-truth latent RR-HMM.

    ``T[i, j] = Pr[h_{t+1}=i | h_t=j]`` and ``O[i, j] = Pr[x_t=i | h_t=j]``;
    both are column-stochastic. ``R`` and ``S`` are recomputed from ``T``
    when not supplied.
    """

    T: np.ndarray
    O: np.ndarray
    pi: np.ndarray
    k: int
    R: Optional[np.ndarray] = field(default=None, repr=False)
    S: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        T = check_column_stochastic(self.T, "T")
        O = check_column_stochastic(self.O, "O")
        pi = np.asarray(self.pi, dtype=float).ravel()
        m = T.shape[0]
        if T.shape != (m, m):
            raise ValueError(f"T must be square, got {T.shape}")
        if O.shape[1] != m or pi.shape != (m,):
            raise ValueError(
                f"inconsistent shapes: T {T.shape}, O {O.shape}, pi {pi.shape}")
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > STOCHASTIC_TOL:
            raise NotStochastic("pi must be a probability vector")
        k = int(self.k)
        if not 1 <= k <= m:
            raise RankMismatch(f"k={k} must lie in [1, {m}]")
        if self.R is None or self.S is None:
            R, S = factorize_transition(T, k)
        else:
            R, S = np.asarray(self.R, float), np.asarray(self.S, float)
            if R.shape != (m, k) or S.shape != (k, m):
                raise ValueError("R and S shapes do not match (m, k)")
            if np.max(np.abs(R @ S - T)) > RECONSTRUCTION_TOL:
                raise RankMismatch("supplied R @ S does not reproduce T")
            if numerical_rank(T) != k:
                raise RankMismatch(f"T does not have numerical rank {k}")
        for name, value in (("T", T), ("O", O), ("pi", pi), ("R", R), ("S", S)):
            object.__setattr__(self, name, _readonly(value))
        object.__setattr__(self, "k", k)

    @property
    def m(self):
        return self.T.shape[0]

    @property
    def n(self):
        return self.O.shape[0]

    def A(self, x):
        """Full-state operator ``T diag(O[x, :])``."""
        return self.T * self.O[x][None, :]

    def W(self, x):
        """Low-rank operator ``S diag(O[x, :]) R``."""
        return (self.S * self.O[x][None, :]) @ self.R

    @property
    def pi_low(self):
        """Least-squares solution of ``R @ pi_l = pi``."""
        pl, *_ = np.linalg.lstsq(self.R, self.pi, rcond=None)
        return pl

    @property
    def prior_in_range(self):
        return bool(np.max(np.abs(self.R @ self.pi_low - self.pi)) <= PRIOR_RANGE_TOL)

    def with_prior(self, pi):
        return RrHmmParams(self.T, self.O, pi, self.k, self.R, self.S)

    # -- serialization -------------------------------------------------
    def to_dict(self):
        return {"m": self.m, "n": self.n, "k": self.k, "T": self.T.tolist(),
                "O": self.O.tolist(), "pi": self.pi.tolist()}

    @classmethod
    def from_dict(cls, d):
        params = cls(np.array(d["T"]), np.array(d["O"]), np.array(d["pi"]),
                     int(d["k"]))
        if params.m != int(d.get("m", params.m)) or params.n != int(d.get("n", params.n)):
            raise ValueError("declared m/n do not match the matrices")
        return params

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# -- validation -----------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    passed: bool
    value: float
    description: str


@dataclass(frozen=True)
class ConditionReport:
    """Pass/fail plus the measured quantity for each learnability condition.

    ``observable_invertible`` is ``None`` unless a projection ``U`` was given.
    """

    prior_positive: CheckResult
    transition_rank: CheckResult
    observation_rank: CheckResult
    r_l1_norm: CheckResult
    r_uniform_column: CheckResult
    observable_invertible: Optional[CheckResult]
    s_pi_o_full_rank: CheckResult

    def items(self):
        for name in ("prior_positive", "transition_rank", "observation_rank",
                     "r_l1_norm", "r_uniform_column", "observable_invertible",
                     "s_pi_o_full_rank"):
            check = getattr(self, name)
            if check is not None:
                yield name, check

    @property
    def all_passed(self):
        return all(c.passed for _, c in self.items())


def validate(params, U=None, tol=RANK_TOL):
    """Check the learnability conditions; never raises on failure."""
    k, m = params.k, params.m
    min_pi = float(params.pi.min())
    rank_T = numerical_rank(params.T, tol)
    rank_O = numerical_rank(params.O, tol)
    r_l1 = float(np.linalg.norm(params.R, 1))
    col_norms = np.linalg.norm(params.R, axis=0)
    bound = np.sqrt(k / m)
    spio = (params.S * params.pi[None, :]) @ params.O.T
    sk_spio = kth_singular_value(spio, k)
    s1_spio = kth_singular_value(spio, 1)

    observable = None
    if U is not None:
        M = np.asarray(U, float).T @ params.O @ params.R
        sk = kth_singular_value(M, k)
        square = M.shape == (k, k)
        observable = CheckResult(
            square and sk > tol * max(kth_singular_value(M, 1), 1e-300), sk,
            "k-th singular value of U^T O R")

    return ConditionReport(
        prior_positive=CheckResult(min_pi > 0, min_pi, "minimum prior entry"),
        transition_rank=CheckResult(rank_T == k, float(rank_T), "numerical rank of T"),
        observation_rank=CheckResult(rank_O >= k, float(rank_O), "numerical rank of O"),
        r_l1_norm=CheckResult(r_l1 <= 1 + 1e-12, r_l1, "induced 1-norm of R"),
        r_uniform_column=CheckResult(
            bool(col_norms.min() <= bound), float(col_norms.min()),
            f"smallest column 2-norm of R (bound sqrt(k/m)={bound:.4g})"),
        observable_invertible=observable,
        s_pi_o_full_rank=CheckResult(
            s1_spio > 0 and sk_spio > tol * s1_spio, sk_spio,
            "k-th singular value of S diag(pi) O^T"),
    )


# -- stationary distribution ----------------------------------------------

def stationary_distribution(T, tol=1e-13, max_iter=1_000_000):
    """Power iteration from the uniform distribution.

    Raises
    ------
    NoConvergence
        If successive iterates still differ by ``tol`` in L1 after
        ``max_iter`` steps (periodic or reducible chains).
    """
    T = check_column_stochastic(T, "T")
    v = np.full(T.shape[0], 1.0 / T.shape[0])
    for _ in range(max_iter):
        w = T @ v
        w /= w.sum()
        if np.abs(w - v).sum() < tol:
            return w
        v = w
    raise NoConvergence(f"power iteration did not converge in {max_iter} steps")


# -- builtin models -------------------------------------------------------

def _project_rank(T, k):
    """Nearest rank-k matrix to a rounded transition matrix, columns renormalized."""
    U, s, Vt = np.linalg.svd(T)
    Tk = (U[:, :k] * s[:k]) @ Vt[:k]
    if np.any(Tk < 0):
        raise NotStochastic("rank projection produced negative transition entries")
    return Tk / Tk.sum(axis=0, keepdims=True)


def _with_stationary_prior(T, O, k):
    T = np.asarray(T, float)
    pi = stationary_distribution(T)
    return RrHmmParams(T, np.asarray(O, float), pi / pi.sum(), k)


# Transcribed from the published 4-digit tables; the rounding lifts the
# trailing singular value off zero, so example 1 and 3 are projected back
# onto their stated rank and example 2 has its columns renormalized.
_EXAMPLE1_T = [[0.3894, 0.2371, 0.3735],
               [0.2371, 0.4985, 0.2644],
               [0.3735, 0.2644, 0.3621]]
_EXAMPLE1_O = [[0.6, 0.2, 0.2],
               [0.2, 0.6, 0.2],
               [0.2, 0.2, 0.6]]
_EXAMPLE2_T = [[0.6736, 0.0051, 0.1639],
               [0.0330, 0.8203, 0.2577],
               [0.2935, 0.1746, 0.5784]]
_EXAMPLE2_O = [[1.0, 0.0, 0.5],
               [0.0, 1.0, 0.5]]
_EXAMPLE3_T = [[0.7829, 0.1036, 0.0399, 0.0736],
               [0.1036, 0.4237, 0.4262, 0.0465],
               [0.0399, 0.4262, 0.4380, 0.0959],
               [0.0736, 0.0465, 0.0959, 0.7840]]
_EXAMPLE3_O = [[1.0, 0.0, 1.0, 0.0],
               [0.0, 1.0, 0.0, 1.0]]


def example1():
    """3 states, 3 observations, rank-2 transitions."""
    T = _project_rank(np.array(_EXAMPLE1_T), 2)
    return _with_stationary_prior(T, _EXAMPLE1_O, 2)


def example2():
    """3 states, 2 observations, full-rank transitions (not 1-step observable)."""
    T = np.array(_EXAMPLE2_T)
    colsum = T.sum(axis=0)
    if np.max(np.abs(colsum - 1)) > STOCHASTIC_TOL:
        logger.debug("example2: renormalizing T columns %s", colsum)
        T = T / colsum
    return _with_stationary_prior(T, _EXAMPLE2_O, 3)


def example3():
    """4 states, 2 observations, rank-3 transitions (not 1-step observable)."""
    T = _project_rank(np.array(_EXAMPLE3_T), 3)
    return _with_stationary_prior(T, _EXAMPLE3_O, 3)


def polygon_hmm(m=10):
    """Rank-3 RR-HMM whose predictive distributions trace an m-gon.

    Four observations factored as two conditionally independent bits with
    success probabilities ``p_i`` and ``q_i`` placed evenly on a circle.
    """
    if m < 3:
        raise ValueError("polygon_hmm needs m >= 3")
    ang = 2 * np.pi * np.arange(1, m + 1) / m
    sin, cos = np.sin(ang), np.cos(ang)
    T = (2 + np.outer(sin, sin) + np.outer(cos, cos)) / (2 * m)
    colsum = T.sum(axis=0)
    adjustment = float(np.max(np.abs(colsum - 1)))
    if adjustment > 0:
        logger.debug("polygon_hmm(%d): column normalization adjusts by %.3e", m, adjustment)
        T = T / colsum
    p = (sin + 1) / 2
    q = (cos + 1) / 2
    O = np.vstack([p * q, p * (1 - q), (1 - p) * q, (1 - p) * (1 - q)])
    O = np.clip(O, 0.0, 1.0)
    O /= O.sum(axis=0, keepdims=True)
    k = numerical_rank(T)
    return _with_stationary_prior(T, O, k)


def random_rrhmm(m, n, k, seed=None, concentration=1.0):
    """Random rank-``k`` RR-HMM with ``T = R S`` built from Dirichlet columns."""
    rng = make_rng(seed)
    R = rng.dirichlet(np.full(m, concentration), size=k).T
    S = rng.dirichlet(np.full(k, concentration), size=m).T
    O = rng.dirichlet(np.full(n, concentration), size=m).T
    T = R @ S
    T /= T.sum(axis=0, keepdims=True)
    return _with_stationary_prior(T, O, k)


BUILTIN_MODELS = {"example1": example1, "example2": example2,
                  "example3": example3, "polygon": polygon_hmm}


def load_model(source, m=None):
    """Resolve a builtin name (``polygon`` takes ``m``) or a JSON model path."""
    if source in BUILTIN_MODELS:
        if source == "polygon":
            return polygon_hmm(10 if m is None else m)
        return BUILTIN_MODELS[source]()
    return RrHmmParams.load(source)


# -- sampling -------------------------------------------------------------

def _check_stationary(params, tol=1e-8):
    resid = np.abs(params.T @ params.pi - params.pi).sum()
    if resid > tol:
        raise NonStationaryPrior(
            f"pi is not stationary for T (L1 residual {resid:.3e})")


def sample_sequence(params, length, seed=None, stationary_check=True):
    """One observation sequence from a single hidden chain started at ``pi``."""
    length = int(length)
    if length <= 0:
        return np.zeros(0, dtype=np.int64)
    if stationary_check:
        _check_stationary(params)
    rng = make_rng(seed)
    u = rng.random((length, 2)).tolist()
    cum_pi = np.cumsum(params.pi).tolist()
    cum_T = np.cumsum(params.T, axis=0).T.tolist()
    cum_O = np.cumsum(params.O, axis=0).T.tolist()
    m1, n1 = params.m - 1, params.n - 1
    out = [0] * length
    h = min(bisect_right(cum_pi, u[0][0]), m1)
    for t in range(length):
        if t:
            h = min(bisect_right(cum_T[h], u[t][0]), m1)
        out[t] = min(bisect_right(cum_O[h], u[t][1]), n1)
    return np.array(out, dtype=np.int64)


def sample_triples(params, N, seed=None, mode="restart"):
    """Draw ``N`` observation triples ``(x1, x2, x3)``.

    ``restart`` draws a fresh ``h1 ~ pi`` for every triple. ``sliding``
    runs one chain of length ``N + 2`` and emits the overlapping windows,
    which requires ``pi`` to be stationary.
    """
    N = int(N)
    if mode not in ("restart", "sliding"):
        raise ValueError(f"unknown sampling mode {mode!r}")
    if mode == "sliding":
        _check_stationary(params)
        if N <= 0:
            return np.zeros((0, 3), dtype=np.int64)
        seq = sample_sequence(params, N + 2, seed)
        return np.lib.stride_tricks.sliding_window_view(seq, 3).copy()
    if N <= 0:
        return np.zeros((0, 3), dtype=np.int64)
    rng = make_rng(seed)
    cum_T = np.cumsum(params.T, axis=0)
    cum_O = np.cumsum(params.O, axis=0)
    cum_pi = np.cumsum(params.pi)
    h = np.minimum(np.searchsorted(cum_pi, rng.random(N), side="right"), params.m - 1)
    out = np.empty((N, 3), dtype=np.int64)
    for t in range(3):
        if t:
            h = categorical_columns(cum_T, h, rng.random(N))
        out[:, t] = categorical_columns(cum_O, h, rng.random(N))
    return out


# -- exact oracle ---------------------------------------------------------

def exact_joint_prob(params, seq, check_low_rank=True):
    """``Pr[x_1..x_t]`` by the forward algorithm in the full state space.

    When the prior lies in the range of ``R`` the low-rank route
    ``1^T R W_{x_t}..W_{x_1} pi_l`` is evaluated too and must agree.
    """
    seq = check_symbols(seq, params.n)
    v = params.pi.copy()
    for x in seq:
        v = params.T @ (params.O[x] * v)
    p = float(v.sum())
    if check_low_rank and params.prior_in_range:
        w = params.pi_low
        for x in seq:
            w = params.W(x) @ w
        p_low = float(params.R.sum(axis=0) @ w)
        if abs(p - p_low) > LOW_RANK_ROUTE_TOL:
            raise InconsistentFactorization(
                f"full-state {p!r} vs low-rank {p_low!r}")
    return p


def exact_all_joint_probs(params, t):
    """Probabilities of all ``n**t`` sequences in lexicographic order."""
    V = params.pi[None, :]
    for _ in range(t):
        # (seqs, n, m): emit each symbol, then transition
        V = (V[:, None, :] * params.O[None, :, :]).reshape(-1, params.m) @ params.T.T
    return V.sum(axis=1)


class FilterResult(NamedTuple):
    beliefs: np.ndarray
    conditionals: np.ndarray

    @property
    def h(self):
        return self.beliefs[-1]


def exact_filter(params, seq):
    """Predictive state beliefs ``Pr[h_t | x_{1:t-1}]`` for t = 1..len+1.

    Returns the stacked beliefs (row 0 is the prior) and the one-step
    conditionals ``Pr[x_s | x_{1:s-1}]``.
    """
    seq = check_symbols(seq, params.n)
    h = params.pi.copy()
    beliefs = [h]
    conds = []
    for x in seq:
        joint = params.O[x] * h
        p = joint.sum()
        if p <= 0:
            raise ZeroProbabilitySequence("sequence has zero probability")
        conds.append(p)
        h = params.T @ (joint / p)
        h = h / h.sum()
        beliefs.append(h)
    return FilterResult(np.array(beliefs), np.array(conds))


def stacked_observation_matrix(params, window):
    """``O_bar[i, c] = Pr[x_t..x_{t+w-1} = event i | h_t = c]``.

    Events are ``window``-tuples encoded lexicographically with the earliest
    symbol most significant.
    """
    O, T = params.O, params.T
    Ob = O
    for _ in range(window - 1):
        # prepend one symbol: O[x, c] * sum_d Ob[rest, d] T[d, c]
        Ob = (O[:, None, :] * (Ob @ T)[None, :, :]).reshape(-1, params.m)
    return Ob
