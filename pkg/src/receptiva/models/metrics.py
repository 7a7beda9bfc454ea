"""Evaluation metrics and the uncertainty cutoff filter."""

from __future__ import annotations

import numpy as np


def evaluate(predictions: np.ndarray, truths: np.ndarray, task: str) -> dict[str, float]:
    """Classification (accuracy/precision/recall/F1, positive = 1) or RMSE.

    Classification predictions may be hard labels or probabilities; anything
    at or above 0.5 counts as the positive class.
    """
    pred = np.asarray(predictions, dtype=float)
    true = np.asarray(truths, dtype=float)
    if pred.size == 0 or pred.shape != true.shape:
        raise ValueError("predictions and truths must be equal-length and non-empty")
    if task == "classify":
        hard = pred >= 0.5
        pos = true == 1
        tp = float(np.count_nonzero(hard & pos))
        fp = float(np.count_nonzero(hard & ~pos))
        fn = float(np.count_nonzero(~hard & pos))
        tn = float(np.count_nonzero(~hard & ~pos))
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        return {
            "accuracy": (tp + tn) / pred.size,
            "precision": precision,
            "recall": recall,
            "f1": f1,
        }
    if task == "regress":
        err = pred - true
        return {"rmse": float(np.sqrt(np.mean(err * err)))}
    raise ValueError(f"unknown task {task!r}")


def sigma_filter(sigma: np.ndarray, cutoff: float = 6.0) -> tuple[np.ndarray, float]:
    """Mask of predictions confident enough to keep (sigma strictly below
    the cutoff) plus the retained fraction."""
    s = np.asarray(sigma, dtype=float)
    mask = s < cutoff
    retained = float(np.count_nonzero(mask) / s.size) if s.size else 0.0
    return mask, retained
