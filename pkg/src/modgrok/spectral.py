"""Length-p DFT, dominant Fourier component, periodicity score, circular stats.

Phase convention, used everywhere in the package: a weight vector
``w[j] = A * cos(2*pi*k*j/p - phi) + eps`` has ``w_hat[k] = (A*p/2) * exp(-1j*phi)``,
so ``phi = -angle(w_hat[k])``.
"""

from __future__ import annotations

from functools import lru_cache
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_vector

TWO_PI = 2.0 * np.pi
# non-DC magnitudes below this fraction of p * max|w| count as numerically zero
FLAT_RTOL = 1e-10


class NoDominantComponentError(ValueError):
    """The vector has no non-DC Fourier content."""


class DegenerateInputError(ValueError):
    """A statistic is undefined for the given input (zero spread or variance)."""


class DominantComponent(NamedTuple):
    frequency: int
    phase: float
    amplitude: float
    dc_offset: float
    magnitude: float  # |w_hat[k]|, the unnormalised value the periodicity score uses


@lru_cache(maxsize=16)
def _dft_matrix(p):
    jk = np.outer(np.arange(p), np.arange(p)) % p  # reduce before scaling keeps angles small
    mat = np.exp(-2j * np.pi * jk / p)
    mat.setflags(write=False)
    return mat


def dft(w):
    """Unnormalised forward DFT by direct summation, ``sum_j w[j] exp(-2i pi jk/p)``.

    Accepts a single vector or a 2-D array of row vectors.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.shape[-1] < 2:
        raise ValueError("DFT length must be >= 2")
    return w @ _dft_matrix(w.shape[-1]).T


def wrap_angle(theta):
    """Map angles into ``[-pi, pi)``."""
    out = np.mod(np.asarray(theta, dtype=np.float64) + np.pi, TWO_PI) - np.pi
    # fmod rounding can land exactly on +pi
    out = np.where(out >= np.pi, out - TWO_PI, out)
    return float(out) if out.ndim == 0 else out


def _flat_tol(W):
    return FLAT_RTOL * W.shape[-1] * np.max(np.abs(W), axis=-1)


def dominant_components(W):
    """Vectorised :func:`dominant_component` over the rows of ``W``.

    Returns a dict of arrays ``frequency, phase, amplitude, dc_offset,
    magnitude, valid``; rows without non-DC content have ``valid=False`` and
    frequency 0.
    """
    W = np.atleast_2d(np.asarray(W, dtype=np.float64))
    p = W.shape[1]
    spec = dft(W)
    half = spec[:, 1 : p // 2 + 1]
    mags = np.abs(half)
    idx = np.argmax(mags, axis=1)
    rows = np.arange(W.shape[0])
    peak = half[rows, idx]
    mag = mags[rows, idx]
    valid = mag > _flat_tol(W)
    return {
        "frequency": np.where(valid, idx + 1, 0),
        "phase": np.where(valid, wrap_angle(-np.angle(peak)), 0.0),
        "amplitude": np.where(valid, 2.0 * mag / p, 0.0),
        "dc_offset": spec[:, 0].real / p,
        "magnitude": mag,
        "valid": valid,
    }


def dominant_component(w):
    """Frequency in ``[1, p//2]``, phase, amplitude and offset of the largest bin."""
    w = check_vector(w)
    comp = dominant_components(w[None, :])
    if not comp["valid"][0]:
        raise NoDominantComponentError("vector has no non-DC Fourier component")
    return DominantComponent(
        int(comp["frequency"][0]),
        float(comp["phase"][0]),
        float(comp["amplitude"][0]),
        float(comp["dc_offset"][0]),
        float(comp["magnitude"][0]),
    )


def phases_at(W, freqs):
    """Phase of bin ``freqs[i]`` of row ``i`` under the module convention."""
    W = np.atleast_2d(np.asarray(W, dtype=np.float64))
    freqs = np.broadcast_to(np.asarray(freqs, dtype=np.int64), (W.shape[0],))
    p = W.shape[1]
    j = np.arange(p)
    basis = np.exp(-2j * np.pi * ((np.outer(freqs, j)) % p) / p)
    return wrap_angle(-np.angle(np.sum(W * basis, axis=1)))


def periodicity_scores(W):
    """Peak over mean of the non-DC DFT magnitudes, per row; flat rows score 1."""
    W = np.atleast_2d(np.asarray(W, dtype=np.float64))
    mags = np.abs(dft(W))[:, 1:]
    peak = mags.max(axis=1)
    mean = mags.mean(axis=1)
    flat = peak <= _flat_tol(W)
    return np.where(flat, 1.0, peak / np.where(flat, 1.0, mean))


def periodicity_score(w):
    w = check_vector(w)
    return float(periodicity_scores(w[None, :])[0])


def circular_mean(theta):
    theta = np.asarray(theta, dtype=np.float64)
    return float(np.arctan2(np.sin(theta).sum(), np.cos(theta).sum()))


def circular_correlation(x, y):
    """Circular correlation coefficient of two paired angle samples.

    ``r = sum(sin(x - mx) sin(y - my)) / sqrt(sum sin^2(x - mx) * sum sin^2(y - my))``
    with circular means ``mx`` and ``my``. Rotating either sample leaves ``r``
    unchanged.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("angle samples must be 1-D and of equal length")
    if x.shape[0] < 2:
        raise ValueError("need at least two angle pairs")
    sx = np.sin(x - circular_mean(x))
    sy = np.sin(y - circular_mean(y))
    sxx = float(np.dot(sx, sx))
    syy = float(np.dot(sy, sy))
    if sxx <= 1e-20 * x.shape[0] or syy <= 1e-20 * x.shape[0]:
        raise DegenerateInputError("angles have no spread around their circular mean")
    return float(np.clip(np.dot(sx, sy) / np.sqrt(sxx * syy), -1.0, 1.0))


class FourierNeuronTransformer(TransformerMixin, BaseEstimator):
    """Map weight vectors (rows) to their dominant-component features.

    Output columns are ``frequency, phase, amplitude, dc_offset,
    periodicity``. Rows with no non-DC content get frequency 0 and phase 0.
    Stateless: ``fit`` only records the input width.
    """

    feature_names = ("frequency", "phase", "amplitude", "dc_offset", "periodicity")

    def fit(self, X, y=None):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] < 2:
            raise ValueError("weight vectors must have length >= 2")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        if not np.all(np.isfinite(X)):
            raise ValueError("weights contain non-finite values")
        comp = dominant_components(X)
        return np.column_stack(
            [
                comp["frequency"].astype(np.float64),
                comp["phase"],
                comp["amplitude"],
                comp["dc_offset"],
                periodicity_scores(X),
            ]
        )

    def get_feature_names_out(self, input_features=None):
        return np.asarray(self.feature_names, dtype=object)
