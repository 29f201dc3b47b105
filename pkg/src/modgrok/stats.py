"""Paired t-test with a two-sided p-value from the regularised incomplete beta."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.special import betainc

P_FLOOR = 1e-300


class TTestResult(NamedTuple):
    t: float
    df: int
    p: float
    n: int
    mean_diff: float
    degenerate: bool = False  # zero variance in the differences
    floored: bool = False  # p underflowed P_FLOOR and is reported as 0


def student_t_two_sided(t, df):
    """``P(|T| >= |t|)`` for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if np.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return float(betainc(0.5 * df, 0.5, x))


def paired_ttest(x, y=None):
    """Paired t-test of ``x - y`` (or of ``x`` alone) against zero mean.

    With zero variance the statistic is 0 (all differences zero) or
    ``+-inf``; the result is flagged ``degenerate``.
    """
    d = np.asarray(x, dtype=np.float64)
    if y is not None:
        d = d - np.asarray(y, dtype=np.float64)
    d = d.ravel()
    n = d.shape[0]
    if n < 2:
        raise ValueError("paired t-test needs at least two pairs")
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    df = n - 1
    if sd == 0.0 or sd <= 1e-15 * max(abs(mean), 1e-300):
        if mean == 0.0:
            return TTestResult(0.0, df, 1.0, n, mean, degenerate=True)
        return TTestResult(float(np.copysign(np.inf, mean)), df, 0.0, n, mean, degenerate=True)
    t = mean / (sd / np.sqrt(n))
    p = student_t_two_sided(t, df)
    floored = p < P_FLOOR
    return TTestResult(float(t), df, 0.0 if floored else p, n, mean, floored=floored)
