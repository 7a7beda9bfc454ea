"""Principal component reduction keeping a target explained-variance share."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(eq=False)
class PcaTransform:
    """Centered orthonormal projection onto the leading components."""

    components: np.ndarray            # (retained, d), orthonormal rows
    mean: np.ndarray                  # (d,)
    retained_count: int
    explained_variance: np.ndarray    # full population eigenvalue spectrum
    explained_fractions: np.ndarray


def pca_fit(rows: np.ndarray, variance_target: float = 0.99) -> PcaTransform:
    """Fit on a row matrix; retain the smallest component count whose
    cumulative explained variance reaches the target."""
    x = np.asarray(rows, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("pca_fit needs at least 2 rows")
    mean = x.mean(axis=0)
    centered = x - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    variances = (s * s) / x.shape[0]
    total = float(variances.sum())
    if total <= 0.0:
        # All-constant input: a single null component, nothing explained.
        return PcaTransform(
            components=np.zeros((1, x.shape[1])),
            mean=mean,
            retained_count=1,
            explained_variance=variances,
            explained_fractions=np.zeros_like(variances),
        )
    fractions = variances / total
    cumulative = np.cumsum(fractions)
    retained = int(np.searchsorted(cumulative, variance_target - 1e-12) + 1)
    retained = min(retained, vt.shape[0])
    components = vt[:retained].copy()
    # Deterministic sign convention: largest-magnitude loading is positive.
    for row in components:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    return PcaTransform(
        components=components,
        mean=mean,
        retained_count=retained,
        explained_variance=variances,
        explained_fractions=fractions,
    )


def pca_apply(transform: PcaTransform, rows: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(rows, dtype=float))
    return (x - transform.mean) @ transform.components.T


def pca_reconstruct(transform: PcaTransform, projected: np.ndarray) -> np.ndarray:
    z = np.atleast_2d(np.asarray(projected, dtype=float))
    return z @ transform.components + transform.mean
