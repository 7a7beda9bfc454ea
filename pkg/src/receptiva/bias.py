"""Counterfactual comparison of prompt-scheduling policies.

Two policies prompt the same synthetic participants over held-out days: a
uniform-random schedule honoring the study's gap bounds, and a model-driven
trigger that prompts at the daily segments with the highest predicted
response probability (same daily budget, same minimum spacing). Responses
are drawn from the cohort's ground-truth response model, so any difference
between the mean collected scores is attributable to the trigger.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ema import composite_score
from .synth import (
    CohortSpec,
    ParticipantPlan,
    derive_rng,
    response_probability,
    sample_ratings,
    schedule_day,
)


@dataclass(eq=False)
class ParticipantBiasInputs:
    """Held-out-day material for one participant: the affect field plus the
    model's per-segment response probabilities."""

    plan: ParticipantPlan
    day_segments: dict[int, tuple[np.ndarray, np.ndarray]]  # day -> (seg ends, p)


@dataclass
class BiasSummary:
    mean_random: float
    mean_triggered: float
    delta_points: float
    delta_sd: float
    n_random_responses: int
    n_triggered_responses: int
    n_truncated_days: int
    random_score_sd: float


def pick_triggered_times(
    seg_end_s: np.ndarray,
    p_response: np.ndarray,
    n_prompts: int,
    min_gap_s: float,
) -> tuple[np.ndarray, bool]:
    """Greedy top-probability prompt times with a minimum spacing.

    Returns the chosen times (sorted) and whether the daily budget could not
    be filled (truncated day).
    """
    order = np.lexsort((seg_end_s, -p_response))
    chosen: list[float] = []
    for i in order:
        t = float(seg_end_s[i])
        if all(abs(t - c) >= min_gap_s for c in chosen):
            chosen.append(t)
            if len(chosen) == n_prompts:
                break
    return np.sort(np.asarray(chosen)), len(chosen) < n_prompts


def _collect_responses(
    spec: CohortSpec,
    plan: ParticipantPlan,
    intercept: float,
    prompt_times: np.ndarray,
    rng: np.random.Generator,
) -> list[int]:
    """Reported composites for the prompts a participant answers."""
    scores = []
    affect = plan.affect_at(prompt_times)
    probs = response_probability(spec, intercept, affect)
    for a, p in zip(affect, probs):
        if rng.random() < p:
            scores.append(composite_score(sample_ratings(float(a), rng, spec.affect.rating_noise_sd)))
    return scores


def trigger_bias_experiment(
    spec: CohortSpec,
    intercept: float,
    inputs: list[ParticipantBiasInputs],
    eval_days: list[int],
    seed: int,
) -> BiasSummary:
    """Run both policies over the held-out days and summarize the gap.

    delta_points = mean(random) - mean(triggered): positive values mean the
    trigger collected more-positive (lower) scores. delta_sd expresses the
    same gap in units of the random policy's reported-score spread.
    """
    min_gap_s = spec.gap_bounds_min[0] * 60.0
    random_scores: list[int] = []
    triggered_scores: list[int] = []
    truncated = 0
    for part in inputs:
        plan = part.plan
        for day in eval_days:
            sched = schedule_day(spec, derive_rng(seed, plan.index, day, 100), day)
            random_scores.extend(
                _collect_responses(spec, plan, intercept, sched, derive_rng(seed, plan.index, day, 101))
            )
            seg_end, p_hat = part.day_segments[day]
            times, was_truncated = pick_triggered_times(
                seg_end, p_hat, spec.ema_per_day, min_gap_s
            )
            truncated += int(was_truncated)
            triggered_scores.extend(
                _collect_responses(spec, plan, intercept, times, derive_rng(seed, plan.index, day, 102))
            )
    rand = np.asarray(random_scores, dtype=float)
    trig = np.asarray(triggered_scores, dtype=float)
    mean_random = float(rand.mean()) if rand.size else float("nan")
    mean_triggered = float(trig.mean()) if trig.size else float("nan")
    delta = mean_random - mean_triggered
    sd = float(rand.std()) if rand.size >= 2 else float("nan")
    return BiasSummary(
        mean_random=mean_random,
        mean_triggered=mean_triggered,
        delta_points=delta,
        delta_sd=delta / sd if sd and np.isfinite(sd) and sd > 0 else float("nan"),
        n_random_responses=int(rand.size),
        n_triggered_responses=int(trig.size),
        n_truncated_days=truncated,
        random_score_sd=sd,
    )
