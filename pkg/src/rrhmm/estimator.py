"""scikit-learn style estimators wrapping the functional API."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_points, check_symbols, check_triples
from .exceptions import DegenerateDenominator, DimensionMismatch, UsageError
from .inference import (DEFAULT_DISTRUST_HORIZON, filter_update, init_belief,
                        predictive, seq_prob, simulate)
from .kde import (KdeConfig, Whitener, default_config, estimate_moments_kde,
                  filter_continuous, kernel_log_densities)
from .moments import estimate_moments, estimate_moments_stacked
from .spectral import DEFAULT_FLOOR, DEFAULT_THRESHOLD, learn, select_rank


def _as_sequences(X):
    """Accept one sequence or a list of (possibly ragged) sequences."""
    if isinstance(X, np.ndarray) and X.ndim == 1:
        return [X]
    if isinstance(X, (list, tuple)) and (len(X) == 0 or np.ndim(X[0]) == 0):
        return [np.asarray(X)]
    return [np.asarray(x) for x in X]


class SpectralRRHMM(BaseEstimator):
    """Reduced-rank HMM learned by the spectral method on discrete symbols.

    Parameters
    ----------
    k : int or None
        Model rank. When ``None`` it is chosen from the singular values of
        the bigram matrix using ``threshold``.
    threshold : float
        Relative singular value cutoff for automatic rank selection.
    window : int
        Length of the stacked past/future observation blocks. ``window > 1``
        requires fitting on a single sequence.
    n_symbols : int or None
        Alphabet size; inferred from the data when ``None``.
    normalizer_floor : float
    distrust_horizon : int
        Steps flagged untrusted after a normalizer underflow.

    Attributes
    ----------
    moments_ : MomentEstimates
    rank_selection_ : RankSelection
    model_ : ObservableModel
    n_symbols_ : int
    """

    def __init__(self, k=None, threshold=DEFAULT_THRESHOLD, window=1, n_symbols=None,
                 normalizer_floor=DEFAULT_FLOOR, distrust_horizon=DEFAULT_DISTRUST_HORIZON):
        self.k = k
        self.threshold = threshold
        self.window = window
        self.n_symbols = n_symbols
        self.normalizer_floor = normalizer_floor
        self.distrust_horizon = distrust_horizon

    def fit(self, X, y=None):
        """Fit on an ``(N, 3)`` array of triples or on one symbol sequence."""
        arr = np.asarray(X)
        n = self.n_symbols if self.n_symbols is not None else int(arr.max()) + 1
        if arr.ndim == 2:
            if self.window != 1:
                raise UsageError("stacked windows need a single sequence, not triples")
            moments = estimate_moments(check_triples(arr, n), n)
        elif arr.ndim == 1:
            moments = estimate_moments_stacked(arr, n, self.window)
        else:
            raise DimensionMismatch(f"expected triples or a sequence, got shape {arr.shape}")
        return self.fit_moments(moments)

    def fit_moments(self, moments):
        """Learn directly from precomputed (possibly population) moments."""
        self.moments_ = moments
        self.n_symbols_ = moments.n_base
        self.rank_selection_ = select_rank(moments, self.threshold)
        k = self.rank_selection_.chosen_k if self.k is None else self.k
        self.model_ = learn(moments, k, self.normalizer_floor)
        return self

    @property
    def k_(self):
        check_is_fitted(self, "model_")
        return self.model_.k

    def sequence_probability(self, seq, clamp=False):
        check_is_fitted(self, "model_")
        p = seq_prob(self.model_, seq)
        return p.value if clamp else p.raw

    def _filtered(self, seq):
        state = init_belief(self.model_)
        for x in check_symbols(seq, self.n_symbols_):
            state = filter_update(self.model_, state, int(x), self.distrust_horizon)
        return state

    def predict_proba(self, X):
        """Next-symbol distribution after each prefix, shape ``(n_prefixes, n)``."""
        check_is_fitted(self, "model_")
        return np.array([predictive(self.model_, self._filtered(s)).probs
                         for s in _as_sequences(X)])

    def predict(self, X):
        return self.predict_proba(X).argmax(axis=1)

    def score_samples(self, X):
        """Per-step log predictive probability of each symbol of a sequence."""
        check_is_fitted(self, "model_")
        seq = check_symbols(X, self.n_symbols_)
        state = init_belief(self.model_)
        out = np.empty(seq.size)
        for t, x in enumerate(seq):
            try:
                p = predictive(self.model_, state).probs[x]
            except DegenerateDenominator:
                p = 0.0
            out[t] = np.log(p) if p > 0 else -np.inf
            state = filter_update(self.model_, state, int(x), self.distrust_horizon)
        return out

    def score(self, X, y=None):
        """Mean per-symbol log-likelihood over one or more sequences."""
        scores = np.concatenate([self.score_samples(s) for s in _as_sequences(X)])
        return float(scores.mean())

    def sample(self, length, random_state=None):
        check_is_fitted(self, "model_")
        return simulate(self.model_, length, random_state, self.distrust_horizon).symbols


class KernelRRHMM(BaseEstimator):
    """Reduced-rank HMM over real-valued observations via kernel features.

    Parameters
    ----------
    k : int or None
    threshold : float
    n_centers : int
        Kernel centers taken, in order, from the distinct training points.
    bandwidth : float or None
        ``None`` uses ``N ** (-1 / (d + 4))``.
    centers : array_like or None
        Explicit kernel centers; overrides ``n_centers``.
    scale : array_like or None
        Per-dimension kernel scale; ``None`` uses the sample standard
        deviation (or 1 after whitening).
    whiten : bool
        Project onto principal axes and rescale before placing kernels.
    """

    def __init__(self, k=None, threshold=DEFAULT_THRESHOLD, n_centers=20, bandwidth=None,
                 centers=None, scale=None, whiten=False, normalizer_floor=DEFAULT_FLOOR,
                 distrust_horizon=DEFAULT_DISTRUST_HORIZON):
        self.k = k
        self.threshold = threshold
        self.n_centers = n_centers
        self.bandwidth = bandwidth
        self.centers = centers
        self.scale = scale
        self.whiten = whiten
        self.normalizer_floor = normalizer_floor
        self.distrust_horizon = distrust_horizon

    def _transform(self, X):
        X = check_points(X)
        return self.whitener_.transform(X) if self.whitener_ is not None else X

    def fit(self, X, y=None):
        """Fit on a ``(T, d)`` point sequence (sliding triples) or ``(N, 3, d)`` triples."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 3:
            flat = X.reshape(-1, X.shape[-1])
        else:
            flat = check_points(X)
        self.whitener_ = Whitener().fit(flat) if self.whiten else None
        Z = self._transform(flat)
        if self.centers is not None:
            centers = np.asarray(self.centers, dtype=float)
            if centers.ndim == 1:
                centers = centers[:, None]
            if self.whitener_ is not None:
                centers = self.whitener_.transform(centers)
            bw = self.bandwidth if self.bandwidth is not None else len(Z) ** (-1 / (Z.shape[1] + 4))
            self.config_ = KdeConfig(centers, bw, self.scale)
        else:
            cfg = default_config(Z, self.n_centers, self.bandwidth)
            scale = cfg.scale if self.scale is None else self.scale
            if self.whiten and self.scale is None:
                scale = np.ones(Z.shape[1])
            self.config_ = KdeConfig(cfg.centers, cfg.bandwidth, scale)
        if X.ndim == 3:
            triples = Z.reshape(X.shape)
        else:
            triples = np.lib.stride_tricks.sliding_window_view(Z, 3, axis=0).transpose(0, 2, 1)
        self.moments_ = estimate_moments_kde(triples, self.config_)
        self.rank_selection_ = select_rank(self.moments_, self.threshold)
        k = self.rank_selection_.chosen_k if self.k is None else self.k
        self.model_ = learn(self.moments_, k, self.normalizer_floor)
        return self

    def _log_jacobian(self):
        return 0.0 if self.whitener_ is None else -np.log(self.whitener_.std_).sum()

    def score_samples(self, X):
        """Filtered one-step log predictive density of each point of a sequence."""
        check_is_fitted(self, "model_")
        Z = self._transform(X)
        logK = kernel_log_densities(Z, self.config_)
        state = init_belief(self.model_)
        out = np.empty(len(Z))
        for t, z in enumerate(Z):
            try:
                w = predictive(self.model_, state).probs
            except DegenerateDenominator:
                w = self.moments_.P1
            out[t] = _logsumexp(logK[t], w)
            state = filter_continuous(self.model_, state, z, self.config_,
                                      self.distrust_horizon)
        return out + self._log_jacobian()

    def marginal_score_samples(self, X):
        """Log density under the unconditional kernel mixture (weights ``P1``)."""
        check_is_fitted(self, "model_")
        logK = kernel_log_densities(self._transform(X), self.config_)
        w = self.moments_.P1
        return np.array([_logsumexp(row, w) for row in logK]) + self._log_jacobian()

    def score(self, X, y=None):
        return float(self.score_samples(X).mean())


def _logsumexp(logk, w):
    mask = w > 0
    if not np.any(mask):
        return -np.inf
    a = logk[mask] + np.log(w[mask])
    top = a.max()
    return float(top + np.log(np.exp(a - top).sum()))
