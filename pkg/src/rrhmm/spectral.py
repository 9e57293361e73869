"""Spectral learning of the observable representation from moment estimates."""

import json
from dataclasses import dataclass

import numpy as np

from ._validation import kth_singular_value
from .exceptions import DegenerateMoments, NotInvertible, RankTooLarge
from .hmm import stacked_observation_matrix
from .moments import EventSpace

PINV_RCOND = 1e-10
DEGENERATE_TOL = 1e-12
DEFAULT_FLOOR = 1e-12
DEFAULT_THRESHOLD = 1e-6


@dataclass(frozen=True)
class ObservableModel:
    """Learned parameters ``b1``, ``b_inf`` and one ``k x k`` operator per symbol.

    Attributes
    ----------
    U : (n_events, k) ndarray
        Orthonormal projection (top-k left singular vectors of ``P21``).
    b1, b_inf : (k,) ndarray
    B : (n_base, k, k) ndarray
        ``B[x]`` is the operator for base symbol ``x``.
    normalizer_floor : float
        Filtering normalizers below this are clamped and flagged.
    """

    U: np.ndarray
    b1: np.ndarray
    b_inf: np.ndarray
    B: np.ndarray
    event_space: EventSpace
    normalizer_floor: float = DEFAULT_FLOOR

    def __post_init__(self):
        k = self.U.shape[1]
        if self.b1.shape != (k,) or self.b_inf.shape != (k,):
            raise ValueError("b1 and b_inf must have length k")
        if self.B.ndim != 3 or self.B.shape[1:] != (k, k):
            raise ValueError(f"operators must be (n, {k}, {k}), got {self.B.shape}")
        if self.B.shape[0] != self.event_space.n_base:
            raise ValueError("one operator per base symbol is required")
        for name in ("U", "b1", "b_inf", "B"):
            getattr(self, name).setflags(write=False)

    @property
    def k(self):
        return self.U.shape[1]

    @property
    def n(self):
        return self.event_space.n_base

    @property
    def window(self):
        return self.event_space.window

    @property
    def B_sum(self):
        return self.B.sum(axis=0)

    def with_floor(self, floor):
        return ObservableModel(self.U, self.b1, self.b_inf, self.B,
                               self.event_space, float(floor))

    def to_dict(self):
        return {"k": self.k, "n": self.n, "window": self.window,
                "U": self.U.tolist(), "b1": self.b1.tolist(),
                "b_inf": self.b_inf.tolist(), "Bx": self.B.tolist(),
                "normalizer_floor": self.normalizer_floor}

    @classmethod
    def from_dict(cls, d):
        model = cls(np.array(d["U"], float), np.array(d["b1"], float),
                    np.array(d["b_inf"], float), np.array(d["Bx"], float),
                    EventSpace(int(d["n"]), int(d.get("window", 1))),
                    float(d.get("normalizer_floor", DEFAULT_FLOOR)))
        if model.k != int(d["k"]):
            raise ValueError("declared k does not match the stored arrays")
        return model

    def save(self, path, extra=None):
        d = self.to_dict()
        if extra:
            d.update(extra)
        with open(path, "w") as fh:
            json.dump(d, fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class RankSelection:
    singular_values: np.ndarray
    chosen_k: int
    threshold_used: float


def select_rank(moments, threshold=DEFAULT_THRESHOLD):
    """Count singular values of ``P21`` at or above ``threshold * s_1``."""
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    s = np.linalg.svd(moments.P21, compute_uv=False)
    chosen = int(np.sum(s >= threshold * s[0])) if s[0] > 0 else 0
    return RankSelection(s, chosen, float(threshold))


def _fix_signs(U):
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def learn(moments, k, normalizer_floor=DEFAULT_FLOOR, rcond=PINV_RCOND):
    """Learn-RR-HMM: SVD of ``P21`` followed by the regressions

    ``b1 = U^T P1``, ``b_inf = (P21^T U)^+ P1`` and
    ``B_x = (U^T P3[x]) (U^T P21)^+``.
    """
    P1, P21, P3 = moments.P1, moments.P21, moments.P3
    k = int(k)
    if k < 1 or k > min(P21.shape):
        raise RankTooLarge(f"k={k} must lie in [1, {min(P21.shape)}]")
    U, s, _ = np.linalg.svd(P21)
    if s[0] <= 0 or s[k - 1] < DEGENERATE_TOL * s[0]:
        raise DegenerateMoments(
            f"sigma_{k}(P21) = {s[k - 1]:.3e} is numerically zero", s)
    U = _fix_signs(U[:, :k])
    b1 = U.T @ P1
    b_inf = np.linalg.pinv(P21.T @ U, rcond=rcond) @ P1
    UP21_pinv = np.linalg.pinv(U.T @ P21, rcond=rcond)
    B = np.einsum("ia,xab,bj->xij", U.T, P3, UP21_pinv)
    return ObservableModel(U, b1, b_inf, B, moments.event_space,
                           float(normalizer_floor))


def observable_transform(model, params):
    """``M = U^T O_bar R``, the similarity linking learned and latent operators."""
    Ob = stacked_observation_matrix(params, model.window)
    return model.U.T @ Ob @ params.R


def similarity_check(model, params, tol=1e-10):
    """Largest deviation from the exact identities

    ``M^{-1} B_x M = W_x``, ``b1 = M pi_l`` and ``b_inf^T = 1^T R M^{-1}``.
    """
    M = observable_transform(model, params)
    if M.shape[0] != M.shape[1] or kth_singular_value(M, params.k) < tol:
        raise NotInvertible(
            f"U^T O R ({M.shape[0]}x{M.shape[1]}) is not invertible; "
            f"sigma_k = {kth_singular_value(M, params.k):.3e}")
    Minv = np.linalg.inv(M)
    dev = max(np.max(np.abs(Minv @ model.B[x] @ M - params.W(x)))
              for x in range(params.n))
    dev = max(dev, np.max(np.abs(model.b1 - M @ params.pi_low)))
    dev = max(dev, np.max(np.abs(model.b_inf - Minv.T @ params.R.sum(axis=0))))
    return float(dev)
