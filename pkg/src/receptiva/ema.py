"""EMA events, composite affect scoring, pseudo-labels and event-level splits.

An event's 13 ratings are 9 negative items followed by 4 positive items on a
1..7 scale; the composite adds the negatives to the reversed (8 - x)
positives, so 13 is maximally positive and 91 maximally negative. Labels
propagate backwards onto sensor segments whose window end falls within a
fixed horizon before the notification.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

N_NEGATIVE_ITEMS = 9
N_POSITIVE_ITEMS = 4
SCORE_MIN = 13
SCORE_MAX = 91
RESPONSE_DEADLINE_S = 90.0
RESPONSE_HARD_LIMIT_S = 306.0

LABEL_RESPONSE = 1
LABEL_NON_RESPONSE = 0
LABEL_NONE = -1


def composite_score(ratings) -> int:
    """Composite affect score: sum of negatives plus reversed positives."""
    r = list(ratings)
    if len(r) != N_NEGATIVE_ITEMS + N_POSITIVE_ITEMS:
        raise ValueError("expected 13 ratings (9 negative then 4 positive)")
    for v in r:
        if int(v) != v or not 1 <= int(v) <= 7:
            raise ValueError(f"rating {v!r} outside 1..7")
    neg = sum(int(v) for v in r[:N_NEGATIVE_ITEMS])
    pos = sum(8 - int(v) for v in r[N_NEGATIVE_ITEMS:])
    return neg + pos


@dataclass(eq=False)
class EmaEvent:
    """One notification, optionally followed by a response with ratings."""

    participant_id: str
    notify_epoch_s: float
    responded: bool
    onset_epoch_s: float | None = None
    ratings: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.responded:
            if self.onset_epoch_s is None or self.ratings is None:
                raise ValueError("responded events need onset and ratings")
            if self.onset_epoch_s < self.notify_epoch_s:
                raise ValueError("onset precedes notification")
            rt = self.response_time_s
            if rt > RESPONSE_HARD_LIMIT_S:
                raise ValueError(f"response time {rt:.1f}s exceeds the 306 s bound")

    @property
    def response_time_s(self) -> float | None:
        if not self.responded:
            return None
        return self.onset_epoch_s - self.notify_epoch_s

    @property
    def late_response(self) -> bool:
        """Responses past the 90 s deadline are kept but flagged."""
        rt = self.response_time_s
        return rt is not None and rt > RESPONSE_DEADLINE_S

    @property
    def composite(self) -> int | None:
        if self.ratings is None:
            return None
        return composite_score(self.ratings)

    @property
    def na_mean(self) -> float | None:
        if self.ratings is None:
            return None
        return float(np.mean(self.ratings[:N_NEGATIVE_ITEMS]))

    @property
    def pa_mean(self) -> float | None:
        if self.ratings is None:
            return None
        return float(np.mean(self.ratings[N_NEGATIVE_ITEMS:]))


def pseudo_label(
    events: list[EmaEvent],
    seg_end_s: np.ndarray,
    window_min: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Attach each segment to the nearest following event within the window.

    Returns (event_index, label) arrays aligned with ``seg_end_s``; segments
    matching no event get event index -1 and label -1. A segment whose end
    falls in [notify - window, notify] for several events attaches to the
    earliest such notification (the one it is about to precede).
    """
    window_s = window_min * 60.0
    event_idx = np.full(seg_end_s.shape, -1, dtype=np.int64)
    labels = np.full(seg_end_s.shape, LABEL_NONE, dtype=np.int8)
    if not events:
        return event_idx, labels
    order = np.argsort([e.notify_epoch_s for e in events], kind="stable")
    notifies = np.array([events[int(i)].notify_epoch_s for i in order])
    responded = np.array([events[int(i)].responded for i in order])
    pos = np.searchsorted(notifies, seg_end_s, side="left")
    ok = pos < notifies.size
    ok[ok] &= notifies[pos[ok]] <= seg_end_s[ok] + window_s
    hit = pos[ok]
    event_idx[ok] = order[hit]
    labels[ok] = np.where(responded[hit], LABEL_RESPONSE, LABEL_NON_RESPONSE)
    return event_idx, labels


@dataclass
class SplitResult:
    """Event-grouped train/test split for one participant."""

    train_rows: np.ndarray
    test_rows: np.ndarray
    excluded: bool = False
    reason: str = ""


def grouped_stratified_split(
    event_ids: np.ndarray,
    labels: np.ndarray,
    test_frac: float,
    seed: int,
    min_events_per_class: int = 2,
) -> SplitResult:
    """Split labeled rows into train/test by whole events, stratified by label.

    Every event's rows land on one side. Each label class contributes
    round(test_frac * n_class) events to the test side (at least 1, at most
    n - 1). Participants lacking ``min_events_per_class`` events in any
    class are marked excluded rather than split.
    """
    if not 0.0 < test_frac < 1.0:
        raise ValueError("test_frac must lie in (0, 1)")
    keep = labels != LABEL_NONE
    ids = event_ids[keep]
    if ids.size == 0:
        return SplitResult(np.empty(0, np.int64), np.empty(0, np.int64), True, "no labeled rows")
    rows = np.flatnonzero(keep)
    classes = {}
    for lab in (LABEL_RESPONSE, LABEL_NON_RESPONSE):
        evs = np.unique(ids[labels[keep] == lab])
        if evs.size:
            classes[lab] = evs
    for lab, evs in classes.items():
        if evs.size < min_events_per_class:
            return SplitResult(
                np.empty(0, np.int64), np.empty(0, np.int64), True,
                f"label {lab} has {evs.size} event(s), need {min_events_per_class}",
            )
    test_events: list[int] = []
    for lab in sorted(classes):
        evs = np.sort(classes[lab])
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, lab])))
        perm = rng.permutation(evs.size)
        n_test = int(np.clip(round(test_frac * evs.size), 1, evs.size - 1))
        test_events.extend(int(evs[i]) for i in perm[:n_test])
    test_set = np.isin(ids, np.asarray(test_events, dtype=ids.dtype))
    return SplitResult(train_rows=rows[~test_set], test_rows=rows[test_set])


@dataclass
class EmaReport:
    """Descriptive receptivity/latency summary of an event log."""

    n_notifications: int
    n_responses: int
    receptivity_rate: float
    mean_response_time_s: float
    median_response_time_s: float
    max_response_time_s: float
    per_day_rates: list[tuple[int, float]]
    n_late_responses: int


def ema_descriptives(events: list[EmaEvent]) -> EmaReport:
    """Notification/response counts, response-time summary and per-day trend."""
    if not events:
        raise ValueError("ema_descriptives needs at least one event")
    n = len(events)
    resp = [e for e in events if e.responded]
    times = np.array([e.response_time_s for e in resp]) if resp else np.empty(0)
    t0 = min(e.notify_epoch_s for e in events)
    day_idx = [int((e.notify_epoch_s - t0) // 86400.0) for e in events]
    per_day: dict[int, list[bool]] = {}
    for d, e in zip(day_idx, events):
        per_day.setdefault(d, []).append(e.responded)
    per_day_rates = [(d, float(np.mean(flags))) for d, flags in sorted(per_day.items())]
    if times.size == 0:
        warnings.warn("event log contains no responses")
    return EmaReport(
        n_notifications=n,
        n_responses=len(resp),
        receptivity_rate=len(resp) / n,
        mean_response_time_s=float(times.mean()) if times.size else float("nan"),
        median_response_time_s=float(np.median(times)) if times.size else float("nan"),
        max_response_time_s=float(times.max()) if times.size else float("nan"),
        per_day_rates=per_day_rates,
        n_late_responses=sum(e.late_response for e in resp),
    )
