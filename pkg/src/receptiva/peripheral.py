"""EDA, skin-temperature and accelerometer feature blocks.

EDA wavelet features use orthonormal Haar detail coefficients at the dyadic
levels whose supports sit nearest 1 s and 0.5 s; the five summary stats are
taken over the first and second finite differences of each coefficient
sequence. Accelerometer windows are summarized on the low-passed magnitude
(norm minus 1 g) with a simple threshold/refractory step counter.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import find_peaks

from .descriptive import stat_block
from .filters import butterworth_lowpass, first_order_lowpass
from .timeseries import Channel, SegmentIndex, SignalRecord, iqr_clean

EDA_WAVELET_SUPPORTS_S = (1.0, 0.5)
EDA_FILTER_CUTOFF_HZ = 1.0

ACC_FILTER_CUTOFF_HZ = 10.0
ACC_FILTER_ORDER = 4
STEP_THRESHOLD_G = 0.1
STEP_REFRACTORY_S = 0.25
ACC_MIN_RATE_HZ = 20.0

_WAVELET_STATS = ("max", "mean", "std", "median", "frac_above_zero")

EDA_FEATURE_NAMES = tuple(
    f"w{int(s * 1000)}ms_d{d}_{stat}"
    for s in EDA_WAVELET_SUPPORTS_S
    for d in (1, 2)
    for stat in _WAVELET_STATS
) + tuple(
    f"{block}_{stat}"
    for block in ("raw", "filtered")
    for stat in ("amplitude", "max", "min", "mean")
)

ST_FEATURE_NAMES = (
    "mean", "median", "mode", "minimum", "range", "rms",
    "zero_cross", "kurtosis", "skew", "q25", "q75",
)

ACC_FEATURE_NAMES = ("mag_mean", "mag_std", "mag_max", "step_count", "cadence_hz")


def haar_level_for_support(target_s: float, rate_hz: float) -> int:
    """Dyadic level whose block support (2^j / rate) is nearest the target."""
    best, best_err = 1, float("inf")
    for level in range(1, 21):
        err = abs(2**level / rate_hz - target_s)
        if err < best_err:
            best, best_err = level, err
    return best


def haar_detail(x: np.ndarray, level: int) -> np.ndarray:
    """Orthonormal Haar detail coefficients at a dyadic level.

    Coefficient k covers the block of 2**level samples starting at
    k * 2**level; a trailing partial block is dropped.
    """
    block = 2**level
    n_blocks = x.size // block
    if n_blocks == 0:
        return np.empty(0)
    b = x[: n_blocks * block].reshape(n_blocks, block)
    half = block // 2
    return (b[:, :half].sum(axis=1) - b[:, half:].sum(axis=1)) / np.sqrt(block)


def _coefficient_stats(c: np.ndarray) -> dict[str, float]:
    n = c.size
    if n == 0:
        return {stat: 0.0 for stat in _WAVELET_STATS}
    mean = float(c.sum()) / n
    dev = c - mean
    half = n >> 1
    part = np.partition(c, (half - 1, half) if n % 2 == 0 else half)
    median = float(part[half]) if n % 2 else 0.5 * (float(part[half - 1]) + float(part[half]))
    return {
        "max": float(c.max()),
        "mean": mean,
        "std": float(np.sqrt(float(dev @ dev) / n)),
        "median": median,
        "frac_above_zero": float(np.count_nonzero(c > 0.0)) / n,
    }


def _range_block(x: np.ndarray) -> dict[str, float]:
    mx, mn = float(x.max()), float(x.min())
    return {"amplitude": mx - mn, "max": mx, "min": mn, "mean": float(x.mean())}


def eda_window_features(
    raw: np.ndarray, filtered: np.ndarray, rate_hz: float
) -> dict[str, float] | None:
    """EDA feature block on one window given raw and 1 Hz-smoothed samples."""
    feats: dict[str, float] = {}
    for support in EDA_WAVELET_SUPPORTS_S:
        level = haar_level_for_support(support, rate_hz)
        if raw.size < 2 * 2**level:
            return None
        coeffs = haar_detail(raw, level)
        tag = f"w{int(support * 1000)}ms"
        for d in (1, 2):
            stats = _coefficient_stats(np.diff(coeffs, n=d))
            for stat, value in stats.items():
                feats[f"{tag}_d{d}_{stat}"] = value
    for block, x in (("raw", raw), ("filtered", filtered)):
        for stat, value in _range_block(x).items():
            feats[f"{block}_{stat}"] = value
    return feats


def eda_features(record: SignalRecord, window: SegmentIndex) -> dict[str, float] | None:
    if record.channel is not Channel.EDA:
        raise ValueError("eda_features expects an EDA record")
    filtered = first_order_lowpass(record.samples, record.sample_rate_hz, EDA_FILTER_CUTOFF_HZ)
    lo, hi = _slice_bounds(record, window.seg_start_s, window.seg_end_s)
    if hi <= lo:
        return None
    return eda_window_features(record.samples[lo:hi], filtered[lo:hi], record.sample_rate_hz)


def st_window_features(cleaned: np.ndarray) -> dict[str, float] | None:
    """Skin-temperature stat block; mode uses 0.1 degC bins."""
    if cleaned.size < 4:
        return None
    return stat_block(cleaned, mode_bin_width=0.1)


def st_features(record: SignalRecord, window: SegmentIndex) -> dict[str, float] | None:
    if record.channel is not Channel.ST:
        raise ValueError("st_features expects an ST record")
    lo, hi = _slice_bounds(record, window.seg_start_s, window.seg_end_s)
    return st_window_features(iqr_clean(record.samples[lo:hi]))


def acc_magnitude(samples: np.ndarray) -> np.ndarray:
    """Euclidean norm of the 3-axis signal minus 1 g of gravity."""
    return np.sqrt(np.sum(samples * samples, axis=1)) - 1.0


def detect_steps(filtered_mag: np.ndarray, rate_hz: float) -> np.ndarray:
    """Indices of magnitude peaks above 0.1 g separated by at least 0.25 s."""
    distance = max(1, int(round(STEP_REFRACTORY_S * rate_hz)))
    peaks, _ = find_peaks(filtered_mag, height=STEP_THRESHOLD_G, distance=distance)
    return peaks


def acc_window_features(
    filtered_mag: np.ndarray, step_count: int, window_len_s: float
) -> dict[str, float]:
    return {
        "mag_mean": float(filtered_mag.mean()),
        "mag_std": float(filtered_mag.std()),
        "mag_max": float(filtered_mag.max()),
        "step_count": float(step_count),
        "cadence_hz": step_count / window_len_s,
    }


def acc_features(record: SignalRecord, window: SegmentIndex) -> dict[str, float] | None:
    if record.channel is not Channel.ACC3:
        raise ValueError("acc_features expects an ACC3 record")
    if record.sample_rate_hz < ACC_MIN_RATE_HZ:
        raise ValueError("ACC sample rate below 20 Hz cannot resolve steps")
    mag = butterworth_lowpass(
        acc_magnitude(record.samples), record.sample_rate_hz,
        ACC_FILTER_CUTOFF_HZ, ACC_FILTER_ORDER,
    )
    lo, hi = _slice_bounds(record, window.seg_start_s, window.seg_end_s)
    if hi <= lo:
        return None
    steps = detect_steps(mag, record.sample_rate_hz)
    in_window = np.count_nonzero((steps >= lo) & (steps < hi))
    return acc_window_features(mag[lo:hi], int(in_window), window.seg_len_s)


def _slice_bounds(record: SignalRecord, t0: float, t1: float) -> tuple[int, int]:
    """Half-open sample slice covering window times [t0, t1)."""
    rate = record.sample_rate_hz
    lo = int(np.ceil((t0 - record.start_epoch_s) * rate - 1e-9))
    hi = int(np.ceil((t1 - record.start_epoch_s) * rate - 1e-9))
    return max(lo, 0), min(hi, record.n_samples)
