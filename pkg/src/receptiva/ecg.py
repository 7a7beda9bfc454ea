"""ECG preprocessing, R-peak detection, beat validation and HRV features.

The detector follows the classic derivative/envelope recipe: differentiate,
rectify, 80 ms moving-average envelope, adaptive threshold tied to a running
median of recent accepted peak heights, 200 ms refractory. Interval validity
uses a criterion-beat-difference rule built from the quartile deviation of
the last 8 accepted intervals with a 50 ms artifact floor.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps
from scipy.interpolate import CubicSpline

from .descriptive import stat_block
from .filters import butterworth_sos
from .timeseries import Channel, SignalRecord

# Detector constants
ENVELOPE_WIDTH_S = 0.08
REFRACTORY_S = 0.2
THRESHOLD_FRACTION = 0.5
PEAK_HISTORY = 8
SNAP_RADIUS_S = 0.06

# Criterion-beat-difference constants: the rule's source text leaves them
# unstated, so they are fixed here to keep tests deterministic.
CBD_HISTORY = 8
CBD_QD_SCALE = 3.32
CBD_ARTIFACT_FLOOR_MS = 50.0

FREQ_BANDS_HZ = {"vlf": (0.003, 0.04), "lf": (0.04, 0.15), "hf": (0.15, 0.40)}
TACHOGRAM_RATE_HZ = 4.0

HR_STAT_PREFIX = "hr"
HRV_FEATURE_NAMES = (
    "hr_mean", "hr_median", "hr_mode", "hr_minimum", "hr_range", "hr_rms",
    "hr_zero_cross", "hr_kurtosis", "hr_skew", "hr_q25", "hr_q75",
    "rmssd", "sdnn", "cvsd", "cvnni",
    "nni20", "nni50", "pnni20", "pnni50",
    "vlf_power", "lf_power", "hf_power", "hf_lf_ratio",
)


@dataclass(eq=False)
class BeatSeries:
    """Detected R-peak times with derived NN intervals and validity flags.

    ``nn_intervals_ms[i]`` spans ``r_peak_times_s[i] .. r_peak_times_s[i+1]``;
    only intervals flagged valid enter feature computation.
    """

    r_peak_times_s: np.ndarray
    nn_intervals_ms: np.ndarray
    valid_flags: np.ndarray

    @classmethod
    def from_peak_times(cls, times_s: np.ndarray) -> "BeatSeries":
        t = np.asarray(times_s, dtype=float)
        nn = np.diff(t) * 1000.0
        return cls(r_peak_times_s=t, nn_intervals_ms=nn, valid_flags=np.ones(nn.size, dtype=bool))

    @property
    def n_intervals(self) -> int:
        return self.nn_intervals_ms.size


def bandpass_ecg(record: SignalRecord) -> SignalRecord:
    """3-45 Hz zero-phase bandpass: cascaded 2nd-order high- and low-pass."""
    if record.channel is not Channel.ECG:
        raise ValueError("bandpass_ecg expects an ECG record")
    if record.sample_rate_hz < 100.0:
        raise ValueError("ECG sample rate below 100 Hz undersamples the QRS complex")
    sos = np.vstack(
        [
            butterworth_sos(2, 3.0, record.sample_rate_hz, "highpass"),
            butterworth_sos(2, 45.0, record.sample_rate_hz, "lowpass"),
        ]
    )
    return record.with_samples(sps.sosfiltfilt(sos, record.samples))


def _local_maxima(x: np.ndarray) -> np.ndarray:
    """Indices of strict-left / non-strict-right local maxima (plateau-left)."""
    if x.size < 3:
        return np.empty(0, dtype=np.int64)
    return np.flatnonzero((x[1:-1] > x[:-2]) & (x[1:-1] >= x[2:])) + 1


def detect_r_peaks(filtered: SignalRecord) -> BeatSeries:
    """Locate R peaks in a bandpassed ECG record.

    Returns peak times snapped to the local maximum of the filtered signal;
    a flat record yields an empty series.
    """
    x = filtered.samples
    rate = filtered.sample_rate_hz
    d = np.abs(np.diff(x))
    if d.size == 0 or float(d.max()) <= 0.0:
        return BeatSeries.from_peak_times(np.empty(0))
    width = max(1, int(round(ENVELOPE_WIDTH_S * rate)))
    kernel = np.ones(width) / width
    env = np.convolve(d, kernel, mode="same")

    cand = _local_maxima(env)
    floor = 1e-12
    cand = cand[env[cand] > floor]
    if cand.size == 0:
        return BeatSeries.from_peak_times(np.empty(0))

    refractory = int(round(REFRACTORY_S * rate))
    # Prime the threshold from the strongest envelope peak in the first
    # 1.5 s (covers at least one beat down to 40 bpm).
    first = cand[cand <= int(1.5 * rate)]
    seed_height = float(env[first].max()) if first.size else float(env[cand[0]])

    heights: list[float] = []      # insertion-ordered recent accepted heights
    sorted_heights: list[float] = []
    threshold = THRESHOLD_FRACTION * seed_height
    accepted: list[int] = []
    env_cand = env[cand]
    for pos, height in zip(cand.tolist(), env_cand.tolist()):
        if height < threshold:
            continue
        if accepted and pos - accepted[-1] < refractory:
            if height > env[accepted[-1]]:
                accepted[-1] = pos      # larger peak inside refractory wins
            continue
        accepted.append(pos)
        heights.append(height)
        bisect.insort(sorted_heights, height)
        if len(heights) > PEAK_HISTORY:
            sorted_heights.remove(heights.pop(0))
        m = len(sorted_heights)
        median = (
            sorted_heights[m // 2]
            if m % 2
            else 0.5 * (sorted_heights[m // 2 - 1] + sorted_heights[m // 2])
        )
        threshold = THRESHOLD_FRACTION * median

    snap = max(1, int(round(SNAP_RADIUS_S * rate)))
    peaks = []
    for pos in accepted:
        lo = max(0, pos - snap)
        hi = min(x.size, pos + snap + 1)
        peaks.append(lo + int(np.argmax(x[lo:hi])))
    peak_idx = np.unique(np.asarray(peaks, dtype=np.int64))
    times = filtered.start_epoch_s + peak_idx / rate
    return BeatSeries.from_peak_times(times)


def validate_beats(beats: BeatSeries) -> BeatSeries:
    """Flag artifactual NN intervals with the criterion-beat-difference rule.

    An interval is invalid when it deviates from the running median of the
    last 8 accepted intervals by more than max(3.32 * QD, 50 ms) / 2. Series
    shorter than 8 intervals carry insufficient history and stay fully valid.
    """
    nn = beats.nn_intervals_ms
    flags = np.ones(nn.size, dtype=bool)
    if nn.size < CBD_HISTORY:
        return BeatSeries(beats.r_peak_times_s.copy(), nn.copy(), flags)
    hist: list[float] = []        # sorted window of accepted intervals
    order: list[float] = []
    for i, value in enumerate(nn.tolist()):
        if len(hist) == CBD_HISTORY:
            median = 0.5 * (hist[3] + hist[4])
            q25 = hist[1] + 0.75 * (hist[2] - hist[1])
            q75 = hist[5] + 0.25 * (hist[6] - hist[5])
            med = CBD_QD_SCALE * 0.5 * (q75 - q25)
            cbd = max(med, CBD_ARTIFACT_FLOOR_MS) / 2.0
            if abs(value - median) > cbd:
                flags[i] = False
                continue
        hist.insert(bisect.bisect_left(hist, value), value)
        order.append(value)
        if len(order) > CBD_HISTORY:
            hist.remove(order.pop(0))
    return BeatSeries(beats.r_peak_times_s.copy(), nn.copy(), flags)


def interpolate_tachogram(times_s: np.ndarray, nn_ms: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cubic interpolation of the NN series onto a uniform 4 Hz grid
    spanning the beat times (linear when under 4 beats)."""
    if times_s.size < 2:
        return np.empty(0), np.empty(0)
    span = times_s[-1] - times_s[0]
    n = int(np.floor(span * TACHOGRAM_RATE_HZ)) + 1
    grid = times_s[0] + np.arange(n) / TACHOGRAM_RATE_HZ
    if times_s.size >= 4:
        values = CubicSpline(times_s, nn_ms)(grid)
    else:
        values = np.interp(grid, times_s, nn_ms)
    return grid, values


def _periodogram_bands(tach: np.ndarray) -> dict[str, float]:
    out = {"vlf_power": 0.0, "lf_power": 0.0, "hf_power": 0.0}
    n = tach.size
    if n < 4:
        return out
    spec = np.fft.rfft(tach)
    power = 2.0 * (spec.real**2 + spec.imag**2) / (n * n)
    power[0] /= 2.0
    if n % 2 == 0:
        power[-1] /= 2.0
    df = TACHOGRAM_RATE_HZ / n
    for name, (lo, hi) in FREQ_BANDS_HZ.items():
        k_lo = int(np.ceil(lo / df - 1e-12))
        k_hi = int(np.ceil(hi / df - 1e-12))
        out[f"{name}_power"] = float(power[k_lo : min(k_hi, power.size)].sum())
    return out


def band_powers(times_s: np.ndarray, nn_ms: np.ndarray) -> dict[str, float]:
    """Spectral power of the NN tachogram in the three standard bands.

    The tachogram is cubic-interpolated onto a 4 Hz grid spanning the beat
    times and the one-sided periodogram is summed per band (mean-square
    amplitude units). Too few beats for any spectrum yields zero powers.
    """
    _, tach = interpolate_tachogram(times_s, nn_ms)
    return _periodogram_bands(tach)


def band_powers_from_grid(
    grid_t: np.ndarray, grid_v: np.ndarray, t0: float, t1: float
) -> dict[str, float]:
    """Band powers over a window of a precomputed record-level tachogram.

    Fitting the interpolant once per record and windowing its grid saves a
    spline solve per window; away from the record edges the grid values
    match the per-window interpolant.
    """
    lo = int(np.searchsorted(grid_t, t0, side="left"))
    hi = int(np.searchsorted(grid_t, t1, side="right"))
    return _periodogram_bands(grid_v[lo:hi])


def hrv_features(
    beats: BeatSeries,
    window_start_s: float,
    window_end_s: float,
    tachogram: tuple[np.ndarray, np.ndarray] | None = None,
) -> dict[str, float] | None:
    """HRV feature block over the valid intervals ending inside a window.

    Returns None (missing block) when fewer than 2 valid intervals fall in
    the window. Successive differences are taken over the retained valid
    sequence, so invalid intervals are bridged, not zero-filled. A
    precomputed record-level ``tachogram`` (grid, values) short-circuits the
    per-window spline for the band powers.
    """
    if beats.n_intervals == 0:
        return None
    end_times = beats.r_peak_times_s[1:]
    lo = np.searchsorted(end_times, window_start_s, side="right")
    hi = np.searchsorted(end_times, window_end_s, side="right")
    sel = slice(lo, hi)
    valid = beats.valid_flags[sel]
    nn = beats.nn_intervals_ms[sel][valid]
    if nn.size < 2:
        return None

    diffs = np.diff(nn)
    rmssd = float(np.sqrt(float(diffs @ diffs) / diffs.size))
    mean_nn = float(nn.sum()) / nn.size
    dev = nn - mean_nn
    sdnn = float(np.sqrt(float(dev @ dev) / nn.size))
    abs_d = np.abs(diffs)
    nni20 = int(np.count_nonzero(abs_d > 20.0))
    nni50 = int(np.count_nonzero(abs_d > 50.0))
    n_diffs = diffs.size

    feats: dict[str, float] = {}
    hr = 60000.0 / nn
    for key, value in stat_block(hr, mode_bin_width=1.0).items():
        feats[f"{HR_STAT_PREFIX}_{key}"] = value
    feats["rmssd"] = rmssd
    feats["sdnn"] = sdnn
    feats["cvsd"] = rmssd / mean_nn
    feats["cvnni"] = sdnn / mean_nn
    feats["nni20"] = float(nni20)
    feats["nni50"] = float(nni50)
    feats["pnni20"] = nni20 / n_diffs
    feats["pnni50"] = nni50 / n_diffs
    if tachogram is None:
        feats.update(band_powers(end_times[sel][valid], nn))
    else:
        feats.update(
            band_powers_from_grid(tachogram[0], tachogram[1], window_start_s, window_end_s)
        )
    lf = feats["lf_power"]
    feats["hf_lf_ratio"] = feats["hf_power"] / lf if lf > 0.0 else 0.0
    return feats
