"""Signal containers, windowing and per-participant normalization.

Signals are uniformly sampled channels; all timestamps are UTC epoch seconds
and implied by ``start_epoch_s + i / sample_rate_hz``. Segmentation produces
fixed-length overlapping windows plus the historic spans that end where each
window ends. Nothing here resamples between device rates.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np


class Channel(str, Enum):
    ECG = "ECG"
    EDA = "EDA"
    ST = "ST"
    ACC3 = "ACC3"


@dataclass(eq=False)
class SignalRecord:
    """One uniformly sampled channel for one participant.

    ``samples`` is shape (n,) for scalar channels and (n, 3) for ACC3
    (units of g). Sample i sits at ``start_epoch_s + i / sample_rate_hz``.
    """

    participant_id: str
    channel: Channel
    sample_rate_hz: float
    start_epoch_s: float
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.dtype.kind != "f":
            self.samples = self.samples.astype(float)
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if self.channel is Channel.ACC3:
            if self.samples.ndim != 2 or self.samples.shape[1] != 3:
                raise ValueError("ACC3 samples must have shape (n, 3)")
        elif self.samples.ndim != 1:
            raise ValueError("scalar channel samples must be 1-D")

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    @property
    def end_epoch_s(self) -> float:
        return self.start_epoch_s + self.duration_s

    def times(self) -> np.ndarray:
        return self.start_epoch_s + np.arange(self.n_samples) / self.sample_rate_hz

    def with_samples(self, samples: np.ndarray) -> "SignalRecord":
        return replace(self, samples=samples)


@dataclass(frozen=True)
class SegmentIndex:
    """One analysis window plus the historic spans ending at its end."""

    participant_id: str
    seg_start_s: float
    seg_len_s: float = 60.0
    historic_spans_s: tuple[float, ...] = ()

    @property
    def seg_end_s(self) -> float:
        return self.seg_start_s + self.seg_len_s


def segment_span(
    participant_id: str,
    start_epoch_s: float,
    duration_s: float,
    seg_len_s: float = 60.0,
    overlap_s: float = 30.0,
    historic_spans_s: tuple[float, ...] = (),
) -> list[SegmentIndex]:
    """Windows of ``seg_len_s`` advancing by len - overlap over a time span.

    Windows lie fully inside the span; a span shorter than one window yields
    an empty list. ``overlap_s >= seg_len_s`` is rejected.
    """
    if not 0 <= overlap_s < seg_len_s:
        raise ValueError("overlap_s must satisfy 0 <= overlap_s < seg_len_s")
    if duration_s < seg_len_s:
        return []
    step = seg_len_s - overlap_s
    count = int(np.floor((duration_s - seg_len_s) / step)) + 1
    return [
        SegmentIndex(
            participant_id=participant_id,
            seg_start_s=start_epoch_s + k * step,
            seg_len_s=seg_len_s,
            historic_spans_s=historic_spans_s,
        )
        for k in range(count)
    ]


def segment(
    record: SignalRecord,
    seg_len_s: float = 60.0,
    overlap_s: float = 30.0,
    historic_spans_s: tuple[float, ...] = (),
) -> list[SegmentIndex]:
    """Cut a record into fixed-length overlapping windows (see segment_span)."""
    return segment_span(
        record.participant_id, record.start_epoch_s, record.duration_s,
        seg_len_s, overlap_s, historic_spans_s,
    )


def iqr_clean(samples: np.ndarray) -> np.ndarray:
    """Replace values outside the 1.5-IQR Tukey fences by linear interpolation.

    Replacement (rather than deletion) keeps the sampling grid uniform for
    downstream filters. Fewer than 4 samples pass through unchanged; edge
    outliers take the nearest retained value.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 4:
        return x.copy()
    q1, q3 = np.percentile(x, [25, 75])
    iqr = q3 - q1
    lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    keep = (x >= lo) & (x <= hi)
    if keep.all():
        return x.copy()
    out = x.copy()
    idx = np.arange(x.size)
    out[~keep] = np.interp(idx[~keep], idx[keep], x[keep])
    return out


@dataclass(frozen=True)
class NormStats:
    """Per-feature mean and population standard deviation from a fit set."""

    mean: np.ndarray
    std: np.ndarray


def normalize_fit(rows: np.ndarray) -> NormStats:
    """Fit per-feature z-score statistics (population std) on a row matrix."""
    x = np.asarray(rows, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("rows must be a non-empty 2-D matrix")
    return NormStats(mean=x.mean(axis=0), std=x.std(axis=0))


def normalize_apply(stats: NormStats, rows: np.ndarray) -> np.ndarray:
    """Apply fitted z-scoring; zero-variance features map to 0."""
    x = np.asarray(rows, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("rows must be a non-empty 2-D matrix")
    nonzero = stats.std > 0.0
    safe = np.where(nonzero, stats.std, 1.0)
    z = (x - stats.mean) / safe
    z[:, ~nonzero] = 0.0
    return z
