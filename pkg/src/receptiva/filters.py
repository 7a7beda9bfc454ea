"""Digital filters used across the signal pipeline.

Butterworth designs come from scipy's bilinear-transformed second-order
sections; zero-phase application runs the cascade forward and backward so
peak positions are not delayed.
"""

from __future__ import annotations

import numpy as np
from scipy import signal as sps


def butterworth_sos(order: int, cutoff_hz: float, rate_hz: float, btype: str) -> np.ndarray:
    if not 0.0 < cutoff_hz < rate_hz / 2.0:
        raise ValueError("cutoff_hz must lie strictly between 0 and the Nyquist rate")
    return sps.butter(order, cutoff_hz, btype=btype, fs=rate_hz, output="sos")


def butterworth_lowpass(
    samples: np.ndarray,
    rate_hz: float,
    cutoff_hz: float,
    order: int = 4,
    zero_phase: bool = True,
) -> np.ndarray:
    """Low-pass Butterworth as a cascade of biquads.

    ``zero_phase=True`` applies the cascade forward-backward (squaring the
    magnitude response, cancelling phase); ``False`` is a single causal pass
    whose gain at the cutoff is 1/sqrt(2).
    """
    if order < 2 or order % 2 != 0:
        raise ValueError("order must be a positive even integer")
    sos = butterworth_sos(order, cutoff_hz, rate_hz, "lowpass")
    x = np.asarray(samples, dtype=float)
    if zero_phase:
        return sps.sosfiltfilt(sos, x)
    return sps.sosfilt(sos, x)


def butterworth_lowpass_gain(freq_hz: float, cutoff_hz: float, order: int) -> float:
    """Analytic single-pass magnitude response 1/sqrt(1 + (f/fc)^(2 order))."""
    return 1.0 / np.sqrt(1.0 + (freq_hz / cutoff_hz) ** (2 * order))


def first_order_lowpass(samples: np.ndarray, rate_hz: float, cutoff_hz: float) -> np.ndarray:
    """Single-pass first-order low-pass (used for the smoothed EDA block)."""
    sos = butterworth_sos(1, cutoff_hz, rate_hz, "lowpass")
    return sps.sosfilt(sos, np.asarray(samples, dtype=float))


def moving_average(x: np.ndarray, width: int) -> np.ndarray:
    """Centered moving average with edge shrinkage, exact via cumulative sums."""
    if width <= 1:
        return np.asarray(x, dtype=float).copy()
    n = x.size
    half_lo = (width - 1) // 2
    half_hi = width // 2
    csum = np.concatenate(([0.0], np.cumsum(x, dtype=float)))
    idx = np.arange(n)
    lo = np.maximum(idx - half_lo, 0)
    hi = np.minimum(idx + half_hi + 1, n)
    return (csum[hi] - csum[lo]) / (hi - lo)
