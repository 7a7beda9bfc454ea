"""Statistical tests used by the cluster and relationship analyses."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps


@dataclass(frozen=True)
class AnovaResult:
    f_stat: float
    p_value: float
    n_participants: int
    n_dropped: int


def rm_anova(values_by_participant: dict[str, dict[int, np.ndarray]]) -> AnovaResult:
    """One-way repeated-measures ANOVA over participant-level condition means.

    Input maps participant -> condition -> raw values; participants missing
    any condition are dropped (and counted). With two conditions the F
    statistic equals the squared paired t statistic.
    """
    conditions = sorted({c for per in values_by_participant.values() for c in per})
    if len(conditions) < 2:
        raise ValueError("need at least 2 conditions")
    rows = []
    dropped = 0
    for pid in sorted(values_by_participant):
        per = values_by_participant[pid]
        if any(c not in per or len(per[c]) == 0 for c in conditions):
            dropped += 1
            continue
        rows.append([float(np.mean(per[c])) for c in conditions])
    n = len(rows)
    if n < 2:
        raise ValueError("need at least 2 participants with every condition")
    m = np.asarray(rows)
    k = len(conditions)
    grand = m.mean()
    ss_cond = n * float(np.sum((m.mean(axis=0) - grand) ** 2))
    ss_subj = k * float(np.sum((m.mean(axis=1) - grand) ** 2))
    ss_total = float(np.sum((m - grand) ** 2))
    ss_err = max(ss_total - ss_cond - ss_subj, 0.0)
    df_cond = k - 1
    df_err = (k - 1) * (n - 1)
    if ss_err == 0.0:
        f = float("inf") if ss_cond > 0 else 0.0
    else:
        f = (ss_cond / df_cond) / (ss_err / df_err)
    p = 1.0 if f == 0.0 else float(sps.f.sf(f, df_cond, df_err))
    return AnovaResult(f_stat=f, p_value=p, n_participants=n, n_dropped=dropped)


def chi2_independence(table: np.ndarray) -> tuple[float, float]:
    """Pearson chi-square on a 2x2 contingency table, no continuity
    correction; requires strictly positive marginals."""
    obs = np.asarray(table, dtype=float)
    if obs.shape != (2, 2):
        raise ValueError("expected a 2x2 table")
    rows = obs.sum(axis=1)
    cols = obs.sum(axis=0)
    if (rows <= 0).any() or (cols <= 0).any():
        raise ValueError("zero marginal in contingency table")
    expected = np.outer(rows, cols) / obs.sum()
    stat = float(np.sum((obs - expected) ** 2 / expected))
    return stat, float(sps.chi2.sf(stat, df=1))


def cohens_kappa(a: np.ndarray, b: np.ndarray) -> float:
    """Chance-corrected agreement between two binary sequences.

    Degenerate cases: identical constants agree perfectly (kappa 1);
    different constants earn 0 and a warning, since chance agreement is
    undefined there.
    """
    a = np.asarray(a).astype(int)
    b = np.asarray(b).astype(int)
    if a.shape != b.shape or a.size < 2:
        raise ValueError("sequences must be equal length >= 2")
    p_o = float(np.mean(a == b))
    pa, pb = float(np.mean(a)), float(np.mean(b))
    p_e = pa * pb + (1 - pa) * (1 - pb)
    if p_e >= 1.0:
        return 1.0
    if (pa in (0.0, 1.0)) and (pb in (0.0, 1.0)):
        warnings.warn("both sequences constant but different; kappa reported as 0")
        return 0.0
    return (p_o - p_e) / (1.0 - p_e)


def point_biserial(binary: np.ndarray, continuous: np.ndarray) -> float:
    """Correlation between a binary and a continuous variable; equals the
    Pearson correlation with 0/1 coding."""
    b = np.asarray(binary).astype(float)
    x = np.asarray(continuous, dtype=float)
    if b.shape != x.shape or b.size < 2:
        raise ValueError("sequences must be equal length >= 2")
    p = float(np.mean(b))
    if p in (0.0, 1.0):
        raise ValueError("both binary groups must be non-empty")
    s = float(x.std())
    if s == 0.0:
        raise ValueError("continuous variable has zero variance")
    m1 = float(x[b == 1].mean())
    m0 = float(x[b == 0].mean())
    return (m1 - m0) / s * float(np.sqrt(p * (1 - p)))


def point_biserial_columns(binary: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Column-wise point-biserial correlations; zero-variance columns get 0."""
    b = np.asarray(binary).astype(float)
    x = np.asarray(matrix, dtype=float)
    p = float(np.mean(b))
    if p in (0.0, 1.0):
        raise ValueError("both binary groups must be non-empty")
    std = x.std(axis=0)
    m1 = x[b == 1].mean(axis=0)
    m0 = x[b == 0].mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = (m1 - m0) / std * np.sqrt(p * (1 - p))
    r[std == 0.0] = 0.0
    return r
