import numpy as np


def make_rng(seed=None):
    """Counter-based (Philox) generator so streams reproduce across platforms.

    ``seed`` may be an int, a sequence of ints, a ``SeedSequence`` or an
    existing ``Generator`` (returned unchanged).
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def cell_seed(seed, *indices):
    """Derive an independent seed for one (N, trial, ...) experiment cell."""
    base = [] if seed is None else [int(seed)]
    return np.random.SeedSequence(base + [int(i) for i in indices])


def categorical_columns(cum, cols, u):
    """Inverse-CDF draws: for each j pick the first row i with cum[i, cols[j]] > u[j]."""
    idx = (cum[:, cols] <= u[None, :]).sum(axis=0)
    return np.minimum(idx, cum.shape[0] - 1)
