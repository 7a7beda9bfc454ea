"""Seeded synthetic cohort generator with full ground truth.

Latent per-minute affect drives everything observable: heart rate rises
with negative affect, electrodermal bursts grow more frequent, and the
chance of answering a prompt follows a logistic in the momentary affect
level. Because the latent state, true response probabilities, beat times
and step times are all retained, every downstream stage can be checked
against ground truth the way a live study never could.

Affect combines a participant offset, a mean-reverting within-day process
and a two-state "negative episode" component, which gives the score
distribution its long negative tail. Signals are stylized rather than
morphologically faithful: a dominant R deflection is all the detector
needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .ema import SCORE_MAX, SCORE_MIN, EmaEvent
from .timeseries import Channel, SignalRecord

EPOCH_BASE_S = 1_700_000_000.0
RESPONSE_TIME_MEDIAN_S = 8.7
RESPONSE_TIME_LOG_SD = 1.32
RESPONSE_TIME_MIN_S = 0.5
RESPONSE_TIME_MAX_S = 306.0

BASE_HR_BPM = 70.0
HR_MIN_BPM, HR_MAX_BPM = 40.0, 140.0


@dataclass(frozen=True)
class AffectProcess:
    """Latent affect dynamics; sd values are pre-clamp process scales.

    Two Markov components ride on the mean-reverting base: sustained
    negative-affect episodes (tens of minutes, raising the score) and brief
    relaxed interludes (lowering it). Their mean contributions are removed
    so the offsets shape the distribution, not its center.
    """

    mean: float = 26.4
    sd: float = 11.1
    reversion_min: float = 150.0
    diurnal_amplitude: float = 0.0
    between_sd: float = 3.5
    episode_rate_per_min: float = 1.0 / 300.0
    episode_mean_min: float = 45.0
    episode_shift: float = 20.0
    dip_rate_per_min: float = 1.0 / 250.0
    dip_mean_min: float = 25.0
    dip_shift: float = -12.0
    rating_noise_sd: float = 2.0


@dataclass(frozen=True)
class CohortSpec:
    n_participants: int = 10
    days: int = 5
    ema_per_day: int = 10
    gap_bounds_min: tuple[float, float] = (15.0, 90.0)
    affect: AffectProcess = field(default_factory=AffectProcess)
    coupling_slope: float = -0.25
    hr_affect_gain: float = 0.5
    response_rate: float = 0.79
    wear_start_h: float = 8.0
    wear_end_h: float = 20.0
    ecg_hz: float = 128.0
    eda_hz: float = 4.0
    st_hz: float = 1.0
    acc_hz: float = 32.0
    ecg_noise_sd: float = 0.01
    rr_jitter: float = 0.03
    seed: int = 0

    def validate(self) -> None:
        lo, hi = self.gap_bounds_min
        wear_min = (self.wear_end_h - self.wear_start_h) * 60.0
        if not 0 < lo <= hi:
            raise ValueError("gap bounds must satisfy 0 < min <= max")
        if self.ema_per_day * hi > 24 * 60:
            raise ValueError("ema_per_day * max gap exceeds a day")
        if (self.ema_per_day - 1) * lo >= wear_min:
            raise ValueError("EMA schedule cannot fit in the wear window")
        if self.affect.sd <= 0:
            raise ValueError("affect sd must be positive")
        if self.coupling_slope > 0:
            raise ValueError("coupling_slope must be <= 0")
        if self.hr_affect_gain <= 0:
            raise ValueError("hr_affect_gain must be positive")
        if not 0 < self.response_rate < 1:
            raise ValueError("response_rate must lie in (0, 1)")

    @property
    def wear_seconds(self) -> float:
        return (self.wear_end_h - self.wear_start_h) * 3600.0

    def day_wear_start(self, day: int) -> float:
        return EPOCH_BASE_S + day * 86400.0 + self.wear_start_h * 3600.0


def derive_rng(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(key))))


def logistic(z):
    return 1.0 / (1.0 + np.exp(-np.asarray(z, dtype=float)))


def response_probability(spec: CohortSpec, intercept: float, affect):
    return logistic(intercept + spec.coupling_slope * (np.asarray(affect) - spec.affect.mean))


@dataclass(eq=False)
class ParticipantPlan:
    """Everything about a participant that precedes signal synthesis."""

    participant_id: str
    index: int
    minute_epochs: np.ndarray        # start of every wear-window minute
    minute_affect: np.ndarray
    notify_epochs: np.ndarray        # flattened over days
    notify_affect: np.ndarray

    def affect_at(self, t) -> np.ndarray:
        idx = np.clip(
            np.searchsorted(self.minute_epochs, np.asarray(t, dtype=float), side="right") - 1,
            0,
            self.minute_epochs.size - 1,
        )
        return self.minute_affect[idx]


@dataclass(eq=False)
class ParticipantTruth:
    minute_epochs: np.ndarray
    minute_affect: np.ndarray
    event_probabilities: np.ndarray
    beat_times_s: np.ndarray
    step_times_s: np.ndarray


@dataclass(eq=False)
class ParticipantData:
    participant_id: str
    day_records: list[dict[Channel, SignalRecord]]
    day_beat_times: list[np.ndarray]
    events: list[EmaEvent]
    truth: ParticipantTruth


@dataclass(eq=False)
class CohortPlan:
    spec: CohortSpec
    plans: list[ParticipantPlan]
    intercept: float


@dataclass(eq=False)
class Cohort:
    spec: CohortSpec
    intercept: float
    participants: list[ParticipantData]

    def all_events(self) -> list[EmaEvent]:
        return [e for p in self.participants for e in p.events]


def _markov_component(
    n: int, rng: np.random.Generator, rate_on: float, mean_min: float,
    shift: float, start_on: bool,
) -> tuple[np.ndarray, bool]:
    """Mean-centered two-state offset track over n minutes."""
    pi_on = rate_on / (rate_on + 1.0 / mean_min)
    p_on_off = 1.0 / mean_min
    flips = rng.random(n)
    track = np.empty(n)
    on = start_on
    for m in range(n):
        if on:
            if flips[m] < p_on_off:
                on = False
        elif flips[m] < rate_on:
            on = True
        track[m] = shift if on else 0.0
    return track - pi_on * shift, on


def _affect_minutes(spec: CohortSpec, rng: np.random.Generator, offset: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-minute latent affect over every day's wear window (pre-clamp)."""
    a = spec.affect
    n_per_day = int(round(spec.wear_seconds / 60.0))
    phi = math.exp(-1.0 / a.reversion_min)

    def stationary(rate_on, mean_min):
        return rate_on / (rate_on + 1.0 / mean_min)

    pi_ep = stationary(a.episode_rate_per_min, a.episode_mean_min)
    pi_dip = stationary(a.dip_rate_per_min, a.dip_mean_min)
    component_var = (
        pi_ep * (1 - pi_ep) * a.episode_shift**2 + pi_dip * (1 - pi_dip) * a.dip_shift**2
    )
    within_var = max(a.sd**2 - a.between_sd**2 - component_var, 1.0)
    sigma_w = math.sqrt(within_var)

    epochs = []
    values = []
    ar = rng.normal(0.0, sigma_w)
    ep_shift = a.episode_shift + 3.0 * rng.standard_normal()
    ep_on = rng.random() < pi_ep
    dip_on = rng.random() < pi_dip
    innov_sd = sigma_w * math.sqrt(1 - phi * phi)
    for day in range(spec.days):
        start = spec.day_wear_start(day)
        eps = rng.standard_normal(n_per_day) * innov_sd
        day_vals = np.empty(n_per_day)
        if day > 0:
            # Overnight: relax the process toward its mean across the gap.
            gap_min = (start - (spec.day_wear_start(day - 1) + spec.wear_seconds)) / 60.0
            decay = phi**gap_min
            ar = ar * decay + rng.normal(0.0, sigma_w * math.sqrt(1 - decay * decay))
            ep_on = rng.random() < pi_ep
            dip_on = rng.random() < pi_dip
        for m in range(n_per_day):
            ar = ar * phi + eps[m]
            day_vals[m] = ar
        episodes, ep_on = _markov_component(
            n_per_day, rng, a.episode_rate_per_min, a.episode_mean_min, ep_shift, ep_on
        )
        dips, dip_on = _markov_component(
            n_per_day, rng, a.dip_rate_per_min, a.dip_mean_min, a.dip_shift, dip_on
        )
        day_vals += episodes + dips
        if a.diurnal_amplitude:
            hours = (np.arange(n_per_day) / 60.0 + spec.wear_start_h)
            day_vals += a.diurnal_amplitude * np.sin(2 * np.pi * (hours - 9.0) / 24.0)
        epochs.append(start + 60.0 * np.arange(n_per_day))
        values.append(day_vals)
    return np.concatenate(epochs), offset + np.concatenate(values)


def schedule_day(spec: CohortSpec, rng: np.random.Generator, day: int) -> np.ndarray:
    lo, hi = spec.gap_bounds_min
    wear_min = spec.wear_seconds / 60.0
    for _ in range(200):
        offset = rng.uniform(0.0, 30.0)
        gaps = rng.uniform(lo, hi, size=spec.ema_per_day - 1)
        minutes = offset + np.concatenate(([0.0], np.cumsum(gaps)))
        if minutes[-1] < wear_min - 1.0:
            return spec.day_wear_start(day) + minutes * 60.0
    raise ValueError("could not place the EMA schedule inside the wear window")


def plan_cohort(spec: CohortSpec) -> CohortPlan:
    """Affect fields and prompt schedules for every participant, with the
    response intercept calibrated to the marginal response-rate target."""
    spec.validate()
    raw_plans = []
    for idx in range(spec.n_participants):
        pid = f"p{idx:02d}"
        offset = spec.affect.between_sd * float(derive_rng(spec.seed, idx, 0).standard_normal())
        epochs, affect = _affect_minutes(spec, derive_rng(spec.seed, idx, 1), spec.affect.mean + offset)
        notifies = np.concatenate(
            [schedule_day(spec, derive_rng(spec.seed, idx, 2, day), day) for day in range(spec.days)]
        )
        raw_plans.append((pid, idx, epochs, affect, notifies))

    # Center the cohort's clamped affect field on the configured mean.
    pooled = np.concatenate([p[3] for p in raw_plans])
    target = spec.affect.mean

    def centered_gap(shift):
        return float(np.mean(np.clip(pooled + shift, SCORE_MIN, SCORE_MAX))) - target

    shift = brentq(centered_gap, -40.0, 40.0, xtol=1e-10)

    plans = []
    for pid, idx, epochs, affect, notifies in raw_plans:
        clamped = np.clip(affect + shift, SCORE_MIN, SCORE_MAX)
        plan = ParticipantPlan(
            participant_id=pid,
            index=idx,
            minute_epochs=epochs,
            minute_affect=clamped,
            notify_epochs=notifies,
            notify_affect=np.empty(0),
        )
        plan.notify_affect = plan.affect_at(notifies)
        plans.append(plan)

    pooled_notify = np.concatenate([p.notify_affect for p in plans])
    if spec.coupling_slope == 0.0:
        intercept = float(np.log(spec.response_rate / (1 - spec.response_rate)))
    else:
        def rate_gap(b):
            return float(np.mean(response_probability(spec, b, pooled_notify))) - spec.response_rate

        intercept = brentq(rate_gap, -30.0, 30.0, xtol=1e-10)
    return CohortPlan(spec=spec, plans=plans, intercept=intercept)


def sample_ratings(affect: float, rng: np.random.Generator, noise_sd: float) -> tuple[int, ...]:
    """13 item ratings whose composite lands near the latent affect value."""
    target = float(np.clip(round(affect + rng.normal(0.0, noise_sd)), SCORE_MIN, SCORE_MAX))
    v = (target - SCORE_MIN) / (SCORE_MAX - SCORE_MIN)
    jitter = rng.integers(-1, 2, size=13)
    neg = np.clip(np.round(1 + 6 * v) + jitter[:9], 1, 7)
    pos = np.clip(np.round(7 - 6 * v) + jitter[9:], 1, 7)
    return tuple(int(x) for x in np.concatenate([neg, pos]))


def draw_events(
    spec: CohortSpec, plan: ParticipantPlan, intercept: float
) -> tuple[list[EmaEvent], np.ndarray]:
    """Bernoulli responses, onsets and ratings for one participant's prompts."""
    rng = derive_rng(spec.seed, plan.index, 3)
    probs = response_probability(spec, intercept, plan.notify_affect)
    events = []
    for t, a, p in zip(plan.notify_epochs, plan.notify_affect, probs):
        responded = bool(rng.random() < p)
        onset = None
        ratings = None
        if responded:
            rt = float(
                np.clip(
                    rng.lognormal(math.log(RESPONSE_TIME_MEDIAN_S), RESPONSE_TIME_LOG_SD),
                    RESPONSE_TIME_MIN_S,
                    RESPONSE_TIME_MAX_S,
                )
            )
            onset = float(t + rt)
            ratings = sample_ratings(float(a), rng, spec.affect.rating_noise_sd)
        events.append(
            EmaEvent(
                participant_id=plan.participant_id,
                notify_epoch_s=float(t),
                responded=responded,
                onset_epoch_s=onset,
                ratings=ratings,
            )
        )
    return events, probs


def beat_times_for_day(
    spec: CohortSpec, plan: ParticipantPlan, day: int, rng: np.random.Generator
) -> np.ndarray:
    """Strictly increasing beat times whose local rate follows affect."""
    start = spec.day_wear_start(day)
    end = start + spec.wear_seconds
    day_sel = (plan.minute_epochs >= start) & (plan.minute_epochs < end)
    affect = plan.minute_affect[day_sel]
    hr = np.clip(
        BASE_HR_BPM + spec.hr_affect_gain * (affect - spec.affect.mean), HR_MIN_BPM, HR_MAX_BPM
    )
    times = []
    t = start + float(rng.uniform(0.2, 0.8))
    for m, rate in enumerate(hr):
        boundary = start + 60.0 * (m + 1)
        if t >= boundary:
            continue
        rr_base = 60.0 / float(rate)
        k = int(75.0 / rr_base) + 3
        eps = rng.standard_normal(k)
        rr = rr_base * (1.0 + spec.rr_jitter * eps)
        prelim = t + np.cumsum(rr)
        rr = rr * (1.0 + 0.015 * np.sin(2 * np.pi * 0.25 * prelim))
        np.clip(rr, 0.3, 2.0, out=rr)
        cand = t + np.cumsum(rr)
        keep = cand < min(boundary, end)
        if keep.any():
            kept = cand[keep]
            times.append(kept)
            t = float(kept[-1])
    if not times:
        return np.empty(0)
    return np.concatenate(times)


def ecg_waveform(
    beat_times: np.ndarray,
    rate_hz: float,
    start_s: float,
    duration_s: float,
    noise_sd: float = 0.0,
    wander_amp: float = 0.1,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Stylized ECG: R spike with S dip and T bump per beat, plus optional
    baseline wander and sensor noise."""
    n = int(round(duration_s * rate_hz))
    components = ((1.0, 0.012, 0.0), (-0.15, 0.020, 0.035), (0.18, 0.045, 0.22))
    all_idx = []
    all_vals = []
    for amp, width, delay in components:
        half = int(math.ceil(3.0 * width * rate_hz))
        offs = np.arange(-half, half + 1)
        center_f = (beat_times - start_s + delay) * rate_hz
        center = np.round(center_f).astype(np.int64)
        idx = center[:, None] + offs[None, :]
        tau = (idx - center_f[:, None]) * (1.0 / (width * rate_hz))
        vals = amp * np.exp(-0.5 * tau * tau)
        ok = (idx >= 0) & (idx < n)
        all_idx.append(idx[ok])
        all_vals.append(vals[ok])
    if all_idx:
        sig = np.bincount(
            np.concatenate(all_idx), weights=np.concatenate(all_vals), minlength=n
        )
    else:
        sig = np.zeros(n)
    if wander_amp:
        t = np.arange(n, dtype=np.float32) / np.float32(rate_hz)
        sig += wander_amp * np.sin(np.float32(2 * np.pi * 0.25) * t + np.float32(1.3))
    if noise_sd and rng is not None:
        sig += noise_sd * rng.standard_normal(n, dtype=np.float32)
    return sig


def constant_hr_beats(
    bpm: float, duration_s: float, start_s: float = 0.0, jitter: float = 0.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Evenly spaced beats at a fixed heart rate (optionally jittered)."""
    rr = 60.0 / bpm
    count = int(math.floor((duration_s - 0.4) / rr)) + 1
    times = start_s + 0.3 + rr * np.arange(count)
    if jitter and rng is not None:
        times = times + rng.normal(0.0, jitter, size=count)
        times.sort()
    return times[times < start_s + duration_s]


def _eda_day(
    spec: CohortSpec, affect: np.ndarray, start: float, rng: np.random.Generator
) -> tuple[np.ndarray, float]:
    n = int(round(spec.wear_seconds * spec.eda_hz))
    tonic = 3.0 + np.cumsum(rng.normal(0.0, 0.003, n))
    np.clip(tonic, 0.5, 12.0, out=tonic)
    lam = np.clip(0.3 * (1.0 + 0.08 * (affect - spec.affect.mean)), 0.05, 2.0)
    counts = rng.poisson(lam)
    total = int(counts.sum())
    sig = tonic + rng.normal(0.0, 0.005, n)
    if total:
        minute_of = np.repeat(np.arange(lam.size), counts)
        onsets = (minute_of * 60.0 + rng.uniform(0.0, 60.0, total)) * spec.eda_hz
        amps = rng.lognormal(math.log(0.3), 0.5, total)
        tau = np.arange(int(12.0 * spec.eda_hz)) / spec.eda_hz
        kernel = (1.0 - np.exp(-tau / 0.7)) * np.exp(-tau / 3.0)
        kernel /= kernel.max()
        idx = np.round(onsets).astype(np.int64)[:, None] + np.arange(kernel.size)[None, :]
        vals = amps[:, None] * kernel[None, :]
        ok = idx < n
        np.add.at(sig, idx[ok], vals[ok])
    return sig, spec.eda_hz


def _st_day(spec: CohortSpec, rng: np.random.Generator) -> np.ndarray:
    n = int(round(spec.wear_seconds * spec.st_hz))
    walk = 33.0 + np.cumsum(rng.normal(0.0, 0.002, n))
    np.clip(walk, 31.0, 35.0, out=walk)
    return walk + rng.normal(0.0, 0.01, n)


def _acc_day(spec: CohortSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Idle 3-axis noise with walking bouts; returns (samples, step offsets s)."""
    n = int(round(spec.wear_seconds * spec.acc_hz))
    samples = rng.normal(0.0, 0.005, (n, 3))
    samples[:, 2] += 1.0
    n_bouts = int(rng.poisson(3.0 * spec.wear_seconds / 3600.0))
    step_offsets = []
    width = max(3, int(round(0.3 * spec.acc_hz)))
    bump = 0.35 * np.sin(np.pi * np.arange(width) / (width - 1))
    for _ in range(n_bouts):
        bout_start = float(rng.uniform(0.0, spec.wear_seconds - 120.0))
        duration = float(rng.uniform(30.0, 90.0))
        t = bout_start
        while t < bout_start + duration:
            step_offsets.append(t)
            j = int(round(t * spec.acc_hz))
            hi = min(j + width, n)
            if hi > j >= 0:
                samples[j:hi, 2] += bump[: hi - j]
                samples[j:hi, 0] += 0.3 * bump[: hi - j]
            t += 0.5 * (1.0 + 0.05 * float(rng.standard_normal()))
    offsets = np.sort(np.asarray(step_offsets)) if step_offsets else np.empty(0)
    return samples, offsets


def synth_day_signals(
    spec: CohortSpec, plan: ParticipantPlan, day: int, with_ecg_waveform: bool = True
) -> tuple[dict[Channel, SignalRecord], np.ndarray, np.ndarray]:
    """Channel records for one wear period, with truth beat and step times.

    ``with_ecg_waveform=False`` omits the ECG record (beat times are still
    returned), for consumers that run on ground-truth beats directly.
    """
    start = spec.day_wear_start(day)
    end = start + spec.wear_seconds
    pid = plan.participant_id
    day_sel = (plan.minute_epochs >= start) & (plan.minute_epochs < end)
    affect = plan.minute_affect[day_sel]

    beats = beat_times_for_day(spec, plan, day, derive_rng(spec.seed, plan.index, 4, day))
    eda, _ = _eda_day(spec, affect, start, derive_rng(spec.seed, plan.index, 6, day))
    st = _st_day(spec, derive_rng(spec.seed, plan.index, 7, day))
    acc, step_off = _acc_day(spec, derive_rng(spec.seed, plan.index, 8, day))
    records = {
        Channel.EDA: SignalRecord(pid, Channel.EDA, spec.eda_hz, start, eda),
        Channel.ST: SignalRecord(pid, Channel.ST, spec.st_hz, start, st),
        Channel.ACC3: SignalRecord(pid, Channel.ACC3, spec.acc_hz, start, acc.astype(np.float32)),
    }
    if with_ecg_waveform:
        ecg = ecg_waveform(
            beats, spec.ecg_hz, start, spec.wear_seconds,
            noise_sd=spec.ecg_noise_sd, rng=derive_rng(spec.seed, plan.index, 5, day),
        )
        records[Channel.ECG] = SignalRecord(pid, Channel.ECG, spec.ecg_hz, start, ecg.astype(np.float32))
    return records, beats, start + step_off


def generate_participant(spec: CohortSpec, plan: ParticipantPlan, intercept: float) -> ParticipantData:
    events, probs = draw_events(spec, plan, intercept)
    day_records = []
    day_beats = []
    steps = []
    for day in range(spec.days):
        records, beats, step_times = synth_day_signals(spec, plan, day)
        day_records.append(records)
        day_beats.append(beats)
        steps.append(step_times)
    truth = ParticipantTruth(
        minute_epochs=plan.minute_epochs,
        minute_affect=plan.minute_affect,
        event_probabilities=probs,
        beat_times_s=np.concatenate(day_beats) if day_beats else np.empty(0),
        step_times_s=np.concatenate(steps) if steps else np.empty(0),
    )
    return ParticipantData(
        participant_id=plan.participant_id,
        day_records=day_records,
        day_beat_times=day_beats,
        events=events,
        truth=truth,
    )


def generate(spec: CohortSpec) -> Cohort:
    """Materialize the whole cohort in memory (small cohorts; larger runs
    should stream participants via plan_cohort/generate_participant)."""
    plan = plan_cohort(spec)
    participants = [generate_participant(spec, p, plan.intercept) for p in plan.plans]
    return Cohort(spec=spec, intercept=plan.intercept, participants=participants)


def paper_preset(seed: int = 0, **overrides) -> CohortSpec:
    """Cohort preset matching the study-scale anchors: mean affect 26.4,
    score spread about 11, a 79% marginal response rate and coupling strong
    enough that receptivity-triggered prompting visibly biases collected
    scores."""
    base = CohortSpec(seed=seed)
    return replace(base, **overrides) if overrides else base
