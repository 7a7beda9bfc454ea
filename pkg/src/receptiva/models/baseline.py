"""Chance-level reference models.

The classifier draws each prediction from the training label distribution,
so its true-positive fraction converges to p_train * p_test. The regressor
samples from a normal fitted to the training scores, clamped to the score
instrument range.
"""

from __future__ import annotations

import warnings

import numpy as np

from ..ema import SCORE_MAX, SCORE_MIN


def baseline_classify_rate(p: float, test_size: int, seed: int) -> np.ndarray:
    """Sampled 0/1 predictions at a fixed positive rate."""
    if p in (0.0, 1.0):
        warnings.warn("single-label training set; baseline is a constant predictor")
        return np.full(test_size, int(p), dtype=np.int8)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    return (rng.random(test_size) < p).astype(np.int8)


def baseline_classify(train_labels: np.ndarray, test_size: int, seed: int) -> np.ndarray:
    """Sampled 0/1 predictions with P(1) equal to the train positive rate."""
    y = np.asarray(train_labels)
    if y.size == 0:
        raise ValueError("empty training labels")
    return baseline_classify_rate(float(np.mean(y == 1)), test_size, seed)


def baseline_regress(
    train_scores: np.ndarray,
    test_size: int,
    seed: int,
    lo: float = float(SCORE_MIN),
    hi: float = float(SCORE_MAX),
) -> np.ndarray:
    """Normal draws from the training score distribution, clamped to range."""
    s = np.asarray(train_scores, dtype=float)
    if s.size < 2:
        raise ValueError("need at least 2 training scores")
    mean, std = float(s.mean()), float(s.std())
    if std == 0.0:
        return np.full(test_size, mean)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    return np.clip(rng.normal(mean, std, size=test_size), lo, hi)
