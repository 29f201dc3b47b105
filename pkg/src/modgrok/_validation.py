"""Input checks shared by the estimators and the functional API."""

import numpy as np


def check_pairs(X, p):
    """Coerce ``X`` to an ``(n, 2)`` int64 array of residues in ``[0, p)``."""
    X = np.asarray(X)
    if X.ndim == 1 and X.shape[0] == 2:
        X = X.reshape(1, 2)
    if X.ndim != 2 or X.shape[1] != 2:
        raise ValueError(f"expected an (n, 2) array of (a, b) pairs, got shape {X.shape}")
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    if not np.issubdtype(X.dtype, np.integer):
        if not np.all(np.isfinite(X)) or np.any(X != np.round(X)):
            raise ValueError("pairs must be integers")
        X = X.astype(np.int64)
    X = X.astype(np.int64, copy=False)
    if X.min() < 0 or X.max() >= p:
        raise IndexError(f"residues must lie in [0, {p - 1}]")
    return X


def check_labels(y, n, p):
    y = np.asarray(y)
    if y.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {y.shape}")
    y = y.astype(np.int64)
    if y.min() < 0 or y.max() >= p:
        raise ValueError(f"labels must lie in [0, {p - 1}]")
    return y


def check_vector(w, min_len=2):
    """1-D finite float64 copy of ``w``."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {w.shape}")
    if w.shape[0] < min_len:
        raise ValueError(f"vector length must be >= {min_len}")
    if not np.all(np.isfinite(w)):
        raise ValueError("vector contains non-finite values")
    return w
