"""Receptivity-affect relationship reporting.

Quantifies how strongly the two predicted constructs move together: kappa
agreement between predicted receptivity and predicted affect binarized at
the balanced cutoff, point-biserial correlation, the score gap between
predicted-response and predicted-non-response rows (in points and in
training-SD units), and the cumulative/density tables of true and predicted
scores conditioned on the true receptivity outcome.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .ema import SCORE_MAX, SCORE_MIN
from .stattests import cohens_kappa, point_biserial

AFFECT_BINARY_CUTOFF = 26.0
SCORE_GRID = np.arange(SCORE_MIN, SCORE_MAX + 1)

ECDF_CURVES = ("true_affect_response", "pred_affect_response", "pred_affect_non_response")


def ecdf_on_grid(values: np.ndarray, grid: np.ndarray = SCORE_GRID) -> np.ndarray:
    """Right-continuous empirical CDF evaluated on an integer grid."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        return np.full(grid.size, np.nan)
    return np.searchsorted(v, grid, side="right") / v.size


def density_on_grid(values: np.ndarray, grid: np.ndarray = SCORE_GRID) -> np.ndarray:
    """Per-integer-score density (unit bins centered on grid points)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return np.full(grid.size, np.nan)
    idx = np.clip(np.round(v).astype(int), grid[0], grid[-1]) - grid[0]
    counts = np.bincount(idx, minlength=grid.size).astype(float)
    return counts / v.size


@dataclass
class RelationshipReport:
    kappa: float
    kappa_degenerate: bool
    point_biserial_r: float
    r_degenerate: bool
    mean_affect_pred_response: float
    mean_affect_pred_non_response: float
    gap_points: float
    gap_sd: float
    pos_affect_rate_pred_response: float
    pos_affect_rate_pred_non_response: float
    ecdf: dict[str, np.ndarray] = field(default_factory=dict)
    distribution: dict[str, np.ndarray] = field(default_factory=dict)
    n_rows: int = 0


def relationship_report(
    pred_response: np.ndarray,
    affect_mu: np.ndarray,
    true_labels: np.ndarray,
    true_affect: np.ndarray,
    train_affect_sd: float,
    cutoff: float = AFFECT_BINARY_CUTOFF,
) -> RelationshipReport:
    """Build the relationship report from aligned, sigma-filtered rows.

    ``true_affect`` is NaN wherever no score was reported (non-responses);
    ``true_labels`` are the actual receptivity outcomes.
    """
    pred_response = np.asarray(pred_response).astype(int)
    affect_mu = np.asarray(affect_mu, dtype=float)
    true_labels = np.asarray(true_labels).astype(int)
    true_affect = np.asarray(true_affect, dtype=float)
    n = pred_response.size
    if n == 0:
        raise ValueError("no rows after the uncertainty filter")

    pred_positive = (affect_mu <= cutoff).astype(int)
    constant_affect = float(affect_mu.std()) == 0.0
    degenerate = constant_affect or np.unique(pred_response).size < 2
    if degenerate:
        kappa, r_pb = float("nan"), float("nan")
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            kappa = cohens_kappa(pred_response, pred_positive)
        r_pb = point_biserial(pred_response, affect_mu)

    resp = pred_response == 1
    mean_resp = float(affect_mu[resp].mean()) if resp.any() else float("nan")
    mean_non = float(affect_mu[~resp].mean()) if (~resp).any() else float("nan")
    if resp.any() and (~resp).any():
        gap_points = mean_non - mean_resp
    else:
        gap_points = 0.0
    gap_sd = gap_points / train_affect_sd if train_affect_sd > 0 else float("nan")

    true_resp = true_labels == 1
    reported = true_resp & np.isfinite(true_affect)
    curves = {
        "true_affect_response": true_affect[reported],
        "pred_affect_response": affect_mu[true_resp],
        "pred_affect_non_response": affect_mu[~true_resp],
    }
    return RelationshipReport(
        kappa=kappa,
        kappa_degenerate=degenerate,
        point_biserial_r=r_pb,
        r_degenerate=degenerate,
        mean_affect_pred_response=mean_resp,
        mean_affect_pred_non_response=mean_non,
        gap_points=gap_points,
        gap_sd=gap_sd,
        pos_affect_rate_pred_response=(
            float(np.mean(pred_positive[resp])) if resp.any() else float("nan")
        ),
        pos_affect_rate_pred_non_response=(
            float(np.mean(pred_positive[~resp])) if (~resp).any() else float("nan")
        ),
        ecdf={k: ecdf_on_grid(v) for k, v in curves.items()},
        distribution={k: density_on_grid(v) for k, v in curves.items()},
        n_rows=n,
    )
