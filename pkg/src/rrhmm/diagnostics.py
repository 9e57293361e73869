"""Sample-complexity diagnostics and the synthetic recovery experiments."""

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from ._random import cell_seed
from ._validation import kth_singular_value
from .exceptions import SequenceSpaceTooLarge
from .hmm import (exact_all_joint_probs, sample_sequence, sample_triples,
                  stacked_observation_matrix)
from .inference import MAX_ENUMERATED, all_sequence_probs
from .moments import (estimate_moments, estimate_moments_stacked,
                      population_moments_stacked)
from .spectral import learn

Z95 = 1.959963984540054
THREADS_ENV = "SPECTRAL_RRHMM_THREADS"


def n_jobs():
    """Worker count, capped by ``SPECTRAL_RRHMM_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def n0(marginal, epsilon):
    """Smallest ``i >= 1`` such that the ``len - i`` least likely outcomes
    carry at most ``epsilon`` of the mass."""
    p = np.sort(np.asarray(marginal, dtype=float))
    tails = np.concatenate([np.cumsum(p)[::-1], [0.0]])  # tails[i] = sum of n-i smallest
    for i in range(1, p.size + 1):
        if tails[i] <= epsilon:
            return i
    return p.size


def theorem_sample_size(t, epsilon, eta, k, sigma_or, sigma_p21, n0_value, C=1.0):
    """Literal evaluation of the finite-sample requirement on ``N``; the
    constant ``C`` is unknown, so this is a shape diagnostic only."""
    with np.errstate(divide="ignore"):
        return float(C * t ** 2 / epsilon ** 2
                     * (k / (sigma_or ** 2 * sigma_p21 ** 4)
                        + k * n0_value / (sigma_or ** 2 * sigma_p21 ** 2))
                     * math.log(1.0 / eta))


@dataclass(frozen=True)
class BoundReport:
    sigma_k_P21: float
    sigma_k_OR: float
    sigma_k_UOR: float
    n0_of_eps: int
    n0_of_scaled_eps: int
    scaled_epsilon: float
    theorem_N: float
    epsilon: float
    eta: float
    t: int
    C: float


def bound_quantities(params, U=None, epsilon=0.1, eta=0.05, t=3, C=1.0, window=1):
    """Quantities entering the sample-size requirement.

    ``n0`` is evaluated on the marginal of the second observation (event).
    ``theorem_N`` uses ``n0`` at the scaled accuracy
    ``sigma_k(OR) sigma_k(P21) epsilon / (4 t sqrt(k))``.
    """
    k = params.k
    P21 = population_moments_stacked(params, window).P21
    Ob = stacked_observation_matrix(params, window)
    OR = Ob @ params.R
    s_p21 = kth_singular_value(P21, k)
    s_or = kth_singular_value(OR, k)
    s_uor = kth_singular_value(np.asarray(U).T @ OR, k) if U is not None else float("nan")
    x2 = Ob @ (params.T @ params.pi)
    scaled = s_or * s_p21 * epsilon / (4 * t * math.sqrt(k))
    n0_scaled = n0(x2, scaled)
    return BoundReport(
        sigma_k_P21=s_p21, sigma_k_OR=s_or, sigma_k_UOR=s_uor,
        n0_of_eps=n0(x2, epsilon), n0_of_scaled_eps=n0_scaled,
        scaled_epsilon=scaled,
        theorem_N=theorem_sample_size(t, epsilon, eta, k, s_or, s_p21, n0_scaled, C),
        epsilon=epsilon, eta=eta, t=t, C=C)


def true_eigenvalues(params):
    """The ``k`` largest-magnitude eigenvalues of ``T`` (the nonzero ones)."""
    ev = np.linalg.eigvals(params.T)
    return _by_magnitude(ev)[:params.k]


def _by_magnitude(ev):
    ev = np.asarray(ev, dtype=complex)
    order = np.lexsort((-ev.imag, -ev.real, -np.abs(ev)))
    return ev[order]


def match_eigenvalues(true, estimated):
    """Greedy nearest pairing; returns ``estimated`` reordered to align with ``true``."""
    true = np.asarray(true, dtype=complex)
    est = np.asarray(estimated, dtype=complex)
    D = np.abs(true[:, None] - est[None, :])
    out = np.empty(true.size, dtype=complex)
    free_t, free_e = set(range(true.size)), set(range(est.size))
    while free_t:
        i, j = min(((i, j) for i in free_t for j in free_e), key=lambda ij: D[ij])
        out[i] = est[j]
        free_t.remove(i)
        free_e.remove(j)
    return out


def sample_moments(params, N, seed, window=1):
    """``N`` restart triples, or for ``window > 1`` one stationary sequence
    yielding ``N`` stacked windows."""
    if window == 1:
        return estimate_moments(sample_triples(params, N, seed, "restart"), params.n)
    seq = sample_sequence(params, N + 2 * window, seed)
    return estimate_moments_stacked(seq, params.n, window)


def _real_if_close(z, tol=1e-12):
    return z.real if abs(z.imag) <= tol else z


@dataclass
class EigenRecoveryResult:
    true_eigs: np.ndarray
    Ns: list
    estimated: dict = field(default_factory=dict)  # (N, trial) -> matched eigs

    @property
    def trials(self):
        return sorted({trial for _, trial in self.estimated})

    def estimates_for(self, N):
        return np.array([self.estimated[(N, tr)] for tr in self.trials])

    def mean(self, N):
        return self.estimates_for(N).mean(axis=0)

    def half_width(self, N):
        E = self.estimates_for(N)
        if len(E) < 2:
            return np.full(E.shape[1], np.nan)
        return Z95 * E.std(axis=0, ddof=1) / math.sqrt(len(E))

    def records(self, name="eigen-recovery"):
        for (N, trial), est in sorted(self.estimated.items()):
            for i, (tv, ev) in enumerate(zip(self.true_eigs, est)):
                yield (name, N, trial, i, _real_if_close(tv), _real_if_close(ev))

    def summary(self, name="eigen-recovery"):
        for N in self.Ns:
            mean, hw = self.mean(N), self.half_width(N)
            for i, tv in enumerate(self.true_eigs):
                yield (name, N, i, _real_if_close(tv), _real_if_close(mean[i]),
                       float(hw[i]), len(self.trials))


def _eigen_trial(params, k, N, seed, window):
    model = learn(sample_moments(params, N, seed, window), k)
    return np.linalg.eigvals(model.B_sum)


def eigen_recovery_experiment(params, k=None, Ns=(10_000, 100_000), trials=20,
                              seed=0, window=1):
    """Eigenvalues of the summed learned operators against those of ``T``."""
    k = params.k if k is None else k
    cells = [(iN, N, tr) for iN, N in enumerate(Ns) for tr in range(trials)]
    eigs = Parallel(n_jobs=n_jobs())(
        delayed(_eigen_trial)(params, k, N, cell_seed(seed, iN, tr), window)
        for iN, N, tr in cells)
    true = true_eigenvalues(params)
    result = EigenRecoveryResult(true, list(Ns))
    for (_, N, tr), ev in zip(cells, eigs):
        result.estimated[(N, tr)] = match_eigenvalues(true, ev)
    return result


def l1_error(model, params, t):
    """``sum |Pr - Pr_hat|`` over every length-``t`` sequence."""
    if params.n ** t > MAX_ENUMERATED:
        raise SequenceSpaceTooLarge(f"{params.n}**{t} sequences exceeds {MAX_ENUMERATED}")
    return float(np.abs(exact_all_joint_probs(params, t) - all_sequence_probs(model, t)).sum())


def _l1_trial(params, k, t, N, seed, window):
    return l1_error(learn(sample_moments(params, N, seed, window), k), params, t)


@dataclass
class L1Result:
    t: int
    Ns: list
    errors: dict = field(default_factory=dict)  # (N, trial) -> L1 error

    def errors_for(self, N):
        return np.array([v for (n, _), v in sorted(self.errors.items()) if n == N])

    def mean(self, N):
        return float(self.errors_for(N).mean())

    def stderr(self, N):
        e = self.errors_for(N)
        return float(e.std(ddof=1) / math.sqrt(len(e))) if len(e) > 1 else float("nan")

    def records(self, name="l1-curve"):
        for (N, trial), err in sorted(self.errors.items()):
            yield (name, N, trial, self.t, 0.0, err)

    def summary(self, name="l1-curve"):
        for N in self.Ns:
            yield (name, N, self.t, 0.0, self.mean(N), Z95 * self.stderr(N),
                   len(self.errors_for(N)))


def l1_error_experiment(params, k=None, t=3, Ns=(1_000, 10_000, 100_000), trials=10,
                        seed=0, window=1):
    """Exhaustive joint-probability L1 error of learned models per sample size."""
    k = params.k if k is None else k
    if params.n ** t > MAX_ENUMERATED:
        raise SequenceSpaceTooLarge(f"{params.n}**{t} sequences exceeds {MAX_ENUMERATED}")
    cells = [(iN, N, tr) for iN, N in enumerate(Ns) for tr in range(trials)]
    errs = Parallel(n_jobs=n_jobs())(
        delayed(_l1_trial)(params, k, t, N, cell_seed(seed, iN, tr), window)
        for iN, N, tr in cells)
    result = L1Result(t, list(Ns))
    for (_, N, tr), e in zip(cells, errs):
        result.errors[(N, tr)] = e
    return result


RECORD_FIELDS = ["experiment", "N", "trial", "index", "true_value", "estimated_value"]
SUMMARY_FIELDS = ["experiment", "N", "index", "true_value", "mean", "half_width", "trials"]


def format_value(v):
    if isinstance(v, (complex, np.complexfloating)):
        return repr(complex(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def parse_value(s):
    try:
        return float(s)
    except ValueError:
        return complex(s)


def write_rows(path, fields, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(fields)
        for row in rows:
            w.writerow([format_value(v) for v in row])


def read_rows(path):
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        return [{key: (val if key == "experiment" else parse_value(val))
                 for key, val in row.items()} for row in r]
