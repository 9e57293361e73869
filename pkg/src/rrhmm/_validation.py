"""Input validation helpers shared by the estimators and the functional API."""

import numpy as np

from .exceptions import (DimensionMismatch, EmptyDataset, NotStochastic,
                         SymbolOutOfRange)

#: singular values below this fraction of the largest count as zero
RANK_TOL = 1e-10
STOCHASTIC_TOL = 1e-12


def numerical_rank(A, tol=RANK_TOL):
    s = np.linalg.svd(np.asarray(A, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def kth_singular_value(A, k):
    """k-th largest singular value (1-based), zero if A has fewer than k."""
    s = np.linalg.svd(np.atleast_2d(np.asarray(A, dtype=float)),
                      compute_uv=False)
    return float(s[k - 1]) if k <= s.size else 0.0


def check_column_stochastic(M, name="matrix", tol=STOCHASTIC_TOL):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise NotStochastic(f"{name} must be 2-D, got shape {M.shape}")
    if not np.all(np.isfinite(M)) or np.any(M < 0):
        raise NotStochastic(f"{name} has negative or non-finite entries")
    err = np.max(np.abs(M.sum(axis=0) - 1.0))
    if err > tol:
        raise NotStochastic(
            f"columns of {name} must sum to 1 (max deviation {err:.3e})")
    return M


def check_symbols(seq, n, name="sequence"):
    """Return ``seq`` as a 1-D int64 array of symbols in ``[0, n)``."""
    arr = np.asarray(seq)
    if arr.size == 0:
        return np.zeros(0, dtype=np.int64)
    if arr.dtype.kind == "f":
        if not np.all(arr == np.round(arr)):
            raise SymbolOutOfRange(f"{name} contains non-integer symbols")
    elif arr.dtype.kind not in "iub":
        raise SymbolOutOfRange(f"{name} must contain integer symbols")
    arr = arr.astype(np.int64)
    if arr.min() < 0 or arr.max() >= n:
        raise SymbolOutOfRange(
            f"{name} symbols must lie in [0, {n}); found range "
            f"[{arr.min()}, {arr.max()}]")
    return arr


def check_triples(data, n):
    """Validate an (N, 3) array of discrete observation triples."""
    arr = np.asarray(data)
    if arr.size == 0:
        raise EmptyDataset("no observation triples supplied")
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise DimensionMismatch(
            f"triples must have shape (N, 3), got {arr.shape}")
    return check_symbols(arr.ravel(), n, "triples").reshape(arr.shape)


def check_points(X, d=None, name="points"):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if d is not None and X.shape[-1] != d:
        raise DimensionMismatch(
            f"{name} have dimension {X.shape[-1]}, expected {d}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contain NaN or infinite values")
    return X
