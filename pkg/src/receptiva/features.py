"""Per-segment feature assembly across channels and historic spans.

Each 1-minute segment carries four feature blocks (HRV, EDA, ST, ACC) for
the momentary window plus every configured historic span ending at the
segment end; step features are momentary-only. Blocks that cannot be
computed (too few beats or samples) are NaN-filled and flag the row as
incomplete; incomplete rows are dropped before modeling. Historic spans
reaching before the recording start shrink to the available prefix and the
covered fraction is recorded per row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ecg as ecg_mod
from . import peripheral as per_mod
from .filters import butterworth_lowpass, first_order_lowpass
from .timeseries import Channel, SignalRecord, iqr_clean, segment_span

MOMENTARY_TAG = "m"


def span_tag(span_s: float | None) -> str:
    if span_s is None:
        return MOMENTARY_TAG
    minutes = span_s / 60.0
    return f"h{minutes:g}"


def feature_names(historic_spans_s: tuple[float, ...]) -> tuple[str, ...]:
    """Column order: per span (momentary first), HRV then EDA, ST, ACC."""
    names: list[str] = []
    for span in (None, *historic_spans_s):
        tag = span_tag(span)
        names.extend(f"hrv_{n}_{tag}" for n in ecg_mod.HRV_FEATURE_NAMES)
        names.extend(f"eda_{n}_{tag}" for n in per_mod.EDA_FEATURE_NAMES)
        names.extend(f"st_{n}_{tag}" for n in per_mod.ST_FEATURE_NAMES)
        acc_names = per_mod.ACC_FEATURE_NAMES if span is None else per_mod.ACC_FEATURE_NAMES[:3]
        names.extend(f"acc_{n}_{tag}" for n in acc_names)
    return tuple(names)


@dataclass(eq=False)
class PreparedDay:
    """One contiguous wear period with channel data ready for windowing."""

    participant_id: str
    start_s: float
    end_s: float
    beats: ecg_mod.BeatSeries
    eda: SignalRecord
    eda_filtered: np.ndarray
    st: SignalRecord
    st_cleaned: np.ndarray
    acc_rate_hz: float
    acc_start_s: float
    acc_mag_filtered: np.ndarray
    step_times_s: np.ndarray
    tachogram: tuple[np.ndarray, np.ndarray] | None = None


def prepare_day(
    channels: dict[Channel, SignalRecord],
    beats: ecg_mod.BeatSeries | None = None,
) -> PreparedDay:
    """Run the record-level preprocessing for one wear period.

    ``beats`` short-circuits ECG filtering/detection when beat times are
    already known (synthetic ground truth); validation still applies.
    """
    required = [Channel.EDA, Channel.ST, Channel.ACC3]
    if beats is None:
        required.append(Channel.ECG)
    for ch in required:
        if ch not in channels:
            raise ValueError(f"missing channel {ch.value}")
    if beats is None:
        beats = ecg_mod.detect_r_peaks(ecg_mod.bandpass_ecg(channels[Channel.ECG]))
    beats = ecg_mod.validate_beats(beats)

    eda = channels[Channel.EDA]
    eda_filtered = first_order_lowpass(eda.samples, eda.sample_rate_hz, per_mod.EDA_FILTER_CUTOFF_HZ)

    st = channels[Channel.ST]
    st_cleaned = iqr_clean(st.samples)

    acc = channels[Channel.ACC3]
    if acc.sample_rate_hz < per_mod.ACC_MIN_RATE_HZ:
        raise ValueError("ACC sample rate below 20 Hz cannot resolve steps")
    mag = butterworth_lowpass(
        per_mod.acc_magnitude(acc.samples), acc.sample_rate_hz,
        per_mod.ACC_FILTER_CUTOFF_HZ, per_mod.ACC_FILTER_ORDER,
    )
    step_idx = per_mod.detect_steps(mag, acc.sample_rate_hz)
    start = max(r.start_epoch_s for r in channels.values())
    end = min(r.end_epoch_s for r in channels.values())
    participant_id = next(iter(channels.values())).participant_id
    valid = beats.valid_flags
    tachogram = ecg_mod.interpolate_tachogram(
        beats.r_peak_times_s[1:][valid], beats.nn_intervals_ms[valid]
    )
    return PreparedDay(
        participant_id=participant_id,
        start_s=start,
        end_s=end,
        beats=beats,
        eda=eda,
        eda_filtered=eda_filtered,
        st=st,
        st_cleaned=st_cleaned,
        acc_rate_hz=acc.sample_rate_hz,
        acc_start_s=acc.start_epoch_s,
        acc_mag_filtered=mag,
        step_times_s=acc.start_epoch_s + step_idx / acc.sample_rate_hz,
        tachogram=tachogram,
    )


@dataclass(eq=False)
class FeatureTable:
    """Feature rows for one participant, segments in time order."""

    participant_id: str
    seg_start_s: np.ndarray
    seg_len_s: float
    matrix: np.ndarray
    names: tuple[str, ...]
    complete: np.ndarray
    coverage: np.ndarray
    span_minutes: tuple[float, ...]

    @property
    def seg_end_s(self) -> np.ndarray:
        return self.seg_start_s + self.seg_len_s

    @property
    def n_rows(self) -> int:
        return self.seg_start_s.size


def _slice(start_s: float, rate: float, n: int, t0: float, t1: float) -> tuple[int, int]:
    lo = int(np.ceil((t0 - start_s) * rate - 1e-9))
    hi = int(np.ceil((t1 - start_s) * rate - 1e-9))
    return max(lo, 0), min(hi, n)


def _window_features(day: PreparedDay, t0: float, t1: float, with_steps: bool) -> list[dict | None]:
    """HRV/EDA/ST/ACC blocks over [t0, t1); None marks a missing block."""
    hrv = ecg_mod.hrv_features(day.beats, t0, t1, tachogram=day.tachogram)

    lo, hi = _slice(day.eda.start_epoch_s, day.eda.sample_rate_hz, day.eda.n_samples, t0, t1)
    eda = None
    if hi > lo:
        eda = per_mod.eda_window_features(
            day.eda.samples[lo:hi], day.eda_filtered[lo:hi], day.eda.sample_rate_hz
        )

    lo, hi = _slice(day.st.start_epoch_s, day.st.sample_rate_hz, day.st_cleaned.size, t0, t1)
    st = per_mod.st_window_features(day.st_cleaned[lo:hi]) if hi > lo else None

    lo, hi = _slice(day.acc_start_s, day.acc_rate_hz, day.acc_mag_filtered.size, t0, t1)
    acc = None
    if hi > lo:
        mag = day.acc_mag_filtered[lo:hi]
        if with_steps:
            n_steps = int(
                np.searchsorted(day.step_times_s, t1) - np.searchsorted(day.step_times_s, t0)
            )
            acc = per_mod.acc_window_features(mag, n_steps, t1 - t0)
        else:
            acc = {
                "mag_mean": float(mag.mean()),
                "mag_std": float(mag.std()),
                "mag_max": float(mag.max()),
            }
    return [hrv, eda, st, acc]


def extract_day_features(
    day: PreparedDay,
    seg_len_s: float = 60.0,
    overlap_s: float = 30.0,
    historic_spans_s: tuple[float, ...] = (300.0, 1800.0, 3600.0),
    keep: "np.ndarray | None" = None,
) -> FeatureTable:
    """Compute the full feature matrix for one wear period.

    ``keep`` optionally masks segments (by index) before any feature work,
    which keeps label-window-only extractions cheap.
    """
    segs = segment_span(
        day.participant_id, day.start_s, day.end_s - day.start_s,
        seg_len_s, overlap_s, historic_spans_s,
    )
    if keep is not None:
        segs = [s for i, s in enumerate(segs) if keep[i]]
    names = feature_names(historic_spans_s)
    n = len(segs)
    matrix = np.full((n, len(names)), np.nan)
    complete = np.zeros(n, dtype=bool)
    coverage = np.ones((n, len(historic_spans_s)))
    starts = np.array([s.seg_start_s for s in segs])

    for i, seg_idx in enumerate(segs):
        t_end = seg_idx.seg_end_s
        values: list[float] = []
        ok = True
        for j, span in enumerate((None, *historic_spans_s)):
            if span is None:
                t0, with_steps = seg_idx.seg_start_s, True
            else:
                t0, with_steps = t_end - span, False
                coverage[i, j - 1] = min(1.0, (t_end - day.start_s) / span)
            blocks = _window_features(day, max(t0, day.start_s), t_end, with_steps)
            sizes = (
                len(ecg_mod.HRV_FEATURE_NAMES),
                len(per_mod.EDA_FEATURE_NAMES),
                len(per_mod.ST_FEATURE_NAMES),
                5 if with_steps else 3,
            )
            for block, size in zip(blocks, sizes):
                if block is None:
                    ok = False
                    values.extend([np.nan] * size)
                else:
                    values.extend(block.values())
        matrix[i] = values
        complete[i] = ok
    return FeatureTable(
        participant_id=day.participant_id,
        seg_start_s=starts,
        seg_len_s=seg_len_s,
        matrix=matrix,
        names=names,
        complete=complete,
        coverage=coverage,
        span_minutes=tuple(s / 60.0 for s in historic_spans_s),
    )


def concat_tables(tables: list[FeatureTable]) -> FeatureTable:
    """Stack per-day tables of one participant into a single time-ordered table."""
    if not tables:
        raise ValueError("no tables to concatenate")
    first = tables[0]
    for t in tables[1:]:
        if t.names != first.names or t.seg_len_s != first.seg_len_s:
            raise ValueError("tables disagree on layout")
    return FeatureTable(
        participant_id=first.participant_id,
        seg_start_s=np.concatenate([t.seg_start_s for t in tables]),
        seg_len_s=first.seg_len_s,
        matrix=np.vstack([t.matrix for t in tables]),
        names=first.names,
        complete=np.concatenate([t.complete for t in tables]),
        coverage=np.vstack([t.coverage for t in tables]),
        span_minutes=first.span_minutes,
    )
