"""Descriptive statistics shared by the per-window feature extractors.

The window stat block (mean, median, mode, minimum, range, rms, zero-cross,
kurtosis, skew, q25, q75) is computed identically for instantaneous heart
rate and skin temperature; only the mode bin width differs between signals.
"""

from __future__ import annotations

import math

import numpy as np

STAT_BLOCK_NAMES = (
    "mean",
    "median",
    "mode",
    "minimum",
    "range",
    "rms",
    "zero_cross",
    "kurtosis",
    "skew",
    "q25",
    "q75",
)


def quantile_sorted(xs: np.ndarray, q: float) -> float:
    """Linear-interpolation quantile of an already sorted 1-D array."""
    n = xs.size
    if n == 1:
        return float(xs[0])
    h = (n - 1) * q
    lo = int(math.floor(h))
    if lo >= n - 1:
        return float(xs[-1])
    frac = h - lo
    return float(xs[lo] + frac * (xs[lo + 1] - xs[lo]))


def histogram_mode(x: np.ndarray, bin_width: float) -> float:
    """Mode of a continuous sample: fixed-width bins anchored at zero,
    midpoint of the fullest bin (smallest bin wins ties)."""
    k = np.floor(x / bin_width).astype(np.int64)
    k0 = int(k.min())
    counts = np.bincount(k - k0)
    return (k0 + int(np.argmax(counts)) + 0.5) * bin_width


def zero_cross_count(x: np.ndarray, center: float) -> int:
    """Number of sign changes of (x - center); exact zeros break a crossing."""
    s = x - center
    return int(np.count_nonzero(s[:-1] * s[1:] < 0.0))


def stat_block(x: np.ndarray, mode_bin_width: float) -> dict[str, float]:
    """The 11-entry window stat block over a 1-D sample.

    Moments are population moments; kurtosis is Fisher excess and skew the
    Fisher-Pearson coefficient, both defined as 0 for zero-variance windows.
    """
    xs = np.sort(x)
    n = xs.size
    mean = float(x.sum()) / n
    dev = x - mean
    dev2 = dev * dev
    m2 = float(dev @ dev) / n
    if m2 > 0.0:
        skew = (float(dev2 @ dev) / n) / m2**1.5
        kurt = (float(dev2 @ dev2) / n) / (m2 * m2) - 3.0
    else:
        skew = 0.0
        kurt = 0.0
    return {
        "mean": mean,
        "median": quantile_sorted(xs, 0.5),
        "mode": histogram_mode(x, mode_bin_width),
        "minimum": float(xs[0]),
        "range": float(xs[-1] - xs[0]),
        "rms": math.sqrt(float(x @ x) / n),
        "zero_cross": float(np.count_nonzero(dev[:-1] * dev[1:] < 0.0)),
        "kurtosis": kurt,
        "skew": skew,
        "q25": quantile_sorted(xs, 0.25),
        "q75": quantile_sorted(xs, 0.75),
    }
