"""Real-valued observations via kernel density features.

Each point is mapped to a normalized vector of Gaussian kernel weights over
a set of centers; moments become averages of outer products of those
stochastic vectors, and filtering blends the per-center operators.
"""

import json
from dataclasses import dataclass

import numpy as np

from ._validation import check_points
from .exceptions import DimensionMismatch, EmptyDataset, NotNormalized
from .inference import DEFAULT_DISTRUST_HORIZON, _apply_operator
from .moments import EventSpace, MomentEstimates


@dataclass(frozen=True)
class KdeConfig:
    """Kernel centers, bandwidth and per-dimension kernel scale.

    The unscaled kernel is ``exp(-||(x - c) / scale||^2 / 2)``; the scaled
    one divides the offset by ``scale * bandwidth`` as well.
    """

    centers: np.ndarray
    bandwidth: float
    scale: np.ndarray = None

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=float)
        if centers.ndim == 1:
            centers = centers[:, None]
        if centers.shape[0] < 2:
            raise ValueError("at least two kernel centers are required")
        if len(np.unique(centers, axis=0)) != len(centers):
            raise ValueError("kernel centers must be pairwise distinct")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        scale = np.ones(centers.shape[1]) if self.scale is None else \
            np.broadcast_to(np.asarray(self.scale, float), (centers.shape[1],)).copy()
        if np.any(scale <= 0):
            raise ValueError("kernel scale must be positive")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "bandwidth", float(self.bandwidth))

    @property
    def n_centers(self):
        return self.centers.shape[0]

    @property
    def dim(self):
        return self.centers.shape[1]

    def to_dict(self):
        return {"centers": self.centers.tolist(), "bandwidth": self.bandwidth,
                "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["centers"], float), float(d["bandwidth"]),
                   np.array(d["scale"], float))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)


class Whitener:
    """Affine map onto the principal axes, scaled to unit variance.

    Makes a spherical kernel in the whitened space an elliptical one in
    the original space.
    """

    def fit(self, X):
        X = check_points(X)
        self.mean_ = X.mean(axis=0)
        _, s, Vt = np.linalg.svd(X - self.mean_, full_matrices=False)
        std = s / np.sqrt(max(len(X) - 1, 1))
        std[std <= 0] = 1.0
        self.components_ = Vt
        self.std_ = std
        return self

    def transform(self, X):
        X = check_points(X, self.mean_.size)
        return (X - self.mean_) @ self.components_.T / self.std_

    def to_dict(self):
        return {"mean": self.mean_.tolist(), "components": self.components_.tolist(),
                "std": self.std_.tolist()}


def select_centers(points, n_centers):
    """First ``n_centers`` distinct points of the stream, in order."""
    points = check_points(points)
    seen, chosen = set(), []
    for p in points:
        key = p.tobytes()
        if key not in seen:
            seen.add(key)
            chosen.append(p)
            if len(chosen) == n_centers:
                break
    if len(chosen) < 2:
        raise ValueError("need at least two distinct points to place kernels")
    return np.array(chosen)


def default_config(points, n_centers, bandwidth=None):
    """Centers from the stream head, per-dimension scale from the sample
    standard deviation, bandwidth ``N ** (-1 / (d + 4))``."""
    points = check_points(points)
    N, d = points.shape
    scale = points.std(axis=0, ddof=1) if N > 1 else np.ones(d)
    scale[~(scale > 0)] = 1.0
    if bandwidth is None:
        bandwidth = N ** (-1.0 / (d + 4))
    return KdeConfig(select_centers(points, n_centers), bandwidth, scale)


def _features(X, config, scaled):
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != config.dim:
        raise DimensionMismatch(f"points have dimension {X.shape[-1]}, kernels {config.dim}")
    width = config.scale * (config.bandwidth if scaled else 1.0)
    d2 = (((X[:, None, :] - config.centers[None, :, :]) / width) ** 2).sum(axis=-1)
    W = np.exp(-0.5 * d2)
    total = W.sum(axis=1, keepdims=True)
    dead = total[:, 0] == 0
    if np.any(dead):
        W[dead] = 0.0
        W[dead, np.argmin(d2[dead], axis=1)] = 1.0
        total[dead] = 1.0
    return W / total


def featurize(x, config, scaled=False):
    """Normalized kernel weights of a single point over all centers."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (config.dim,):
        raise DimensionMismatch(f"point has shape {x.shape}, expected ({config.dim},)")
    return _features(x[None, :], config, scaled)[0]


def featurize_many(X, config, scaled=False):
    return _features(check_points(X), config, scaled)


def estimate_moments_kde(data, config):
    """Moments from ``N`` triples of points, shape ``(N, 3, d)``.

    ``P3[x]`` uses the bandwidth-scaled features of the middle point as the
    weight of center ``x``; every other feature uses the unscaled kernel.
    """
    data = np.asarray(data, dtype=float)
    if data.size == 0:
        raise EmptyDataset("no observation triples supplied")
    if data.ndim == 2 and config.dim == 1:
        data = data[:, :, None]
    if data.ndim != 3 or data.shape[1] != 3:
        raise DimensionMismatch(f"expected (N, 3, d) triples, got {data.shape}")
    N = data.shape[0]
    phi = _features(data[:, 0], config, False)
    psi = _features(data[:, 1], config, False)
    xi = _features(data[:, 2], config, False)
    zeta = _features(data[:, 1], config, True)
    P1 = phi.mean(axis=0)
    P21 = psi.T @ phi / N
    P3 = np.einsum("nx,ni,nj->xij", zeta, xi, phi) / N
    return MomentEstimates(P1, P21, P3, N, EventSpace(config.n_centers, 1))


def blended_operator(model, sigma):
    """Convex combination ``sum_j sigma_j B_j`` of the per-center operators."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (model.n,):
        raise DimensionMismatch(f"sigma must have length {model.n}")
    if abs(sigma.sum() - 1.0) > 1e-8:
        raise NotNormalized(f"sigma sums to {sigma.sum():.12g}, not 1")
    return np.tensordot(sigma, model.B, axes=1)


def filter_continuous(model, state, x, config, distrust_horizon=DEFAULT_DISTRUST_HORIZON):
    """Filter on a real-valued point via the bandwidth-scaled blended operator."""
    sigma = featurize(x, config, scaled=True)
    return _apply_operator(model, state, blended_operator(model, sigma), distrust_horizon)


def kernel_log_densities(X, config):
    """``log N(x; c_i, diag(scale * bandwidth)^2)`` for every point and center."""
    X = check_points(X, config.dim)
    width = config.scale * config.bandwidth
    d2 = (((X[:, None, :] - config.centers[None, :, :]) / width) ** 2).sum(axis=-1)
    log_norm = -0.5 * config.dim * np.log(2 * np.pi) - np.log(width).sum()
    return log_norm - 0.5 * d2
