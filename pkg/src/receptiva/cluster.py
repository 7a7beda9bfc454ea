"""K-means clustering with k-means++ seeding plus silhouette scoring.

Cluster analysis runs on the feature columns most correlated with
receptivity; the per-cluster report contrasts receptivity rates with
reported affect to characterize a low- and a high-receptivity cluster.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .stattests import point_biserial_columns


def _kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    first = int(rng.integers(n))
    centers[0] = X[first]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(np.searchsorted(np.cumsum(d2 / total), rng.random(), side="right"))
            idx = min(idx, n - 1)
        centers[j] = X[idx]
        d2 = np.minimum(d2, np.sum((X - centers[j]) ** 2, axis=1))
    return centers


def _lloyd(X: np.ndarray, centers: np.ndarray, max_iter: int) -> tuple[np.ndarray, np.ndarray, float]:
    k = centers.shape[0]
    prev_inertia = np.inf
    labels = np.zeros(X.shape[0], dtype=np.int32)
    for _ in range(max_iter):
        d2 = (
            np.sum(X * X, axis=1)[:, None]
            - 2.0 * X @ centers.T
            + np.sum(centers * centers, axis=1)[None, :]
        )
        np.maximum(d2, 0.0, out=d2)
        new_labels = np.argmin(d2, axis=1).astype(np.int32)
        inertia = float(d2[np.arange(X.shape[0]), new_labels].sum())
        assert inertia <= prev_inertia + 1e-6 * max(1.0, abs(prev_inertia)), \
            "k-means inertia increased"
        if inertia == prev_inertia and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        prev_inertia = inertia
        for j in range(k):
            members = X[labels == j]
            if members.shape[0] == 0:
                # Reseed an empty cluster at the point farthest from its center.
                worst = int(np.argmax(d2[np.arange(X.shape[0]), labels]))
                centers[j] = X[worst]
            else:
                centers[j] = members.mean(axis=0)
    return labels, centers, prev_inertia


def kmeans(
    X: np.ndarray,
    k: int = 2,
    max_iter: int = 300,
    seed: int = 0,
    restarts: int = 10,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Best-of-restarts Lloyd iterations; returns (labels, centers, inertia)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or k < 1 or k > X.shape[0]:
        raise ValueError("need a 2-D matrix with at least k rows")
    best = None
    for r in range(restarts):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, r])))
        centers = _kmeans_pp_init(X, k, rng)
        labels, centers, inertia = _lloyd(X, centers.copy(), max_iter)
        if best is None or inertia < best[2]:
            best = (labels, centers, inertia)
    return best


def silhouette(X: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette (b - a) / max(a, b); singleton clusters score 0."""
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if uniq.size < 2:
        raise ValueError("silhouette needs at least 2 clusters")
    n = X.shape[0]
    sq = np.sum(X * X, axis=1)
    # Summed distance from every point to every cluster, in row chunks.
    sum_to = np.zeros((n, uniq.size))
    counts = np.array([np.count_nonzero(labels == c) for c in uniq], dtype=float)
    chunk = max(1, int(2**22 // max(n, 1)))
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        d2 = sq[lo:hi, None] - 2.0 * X[lo:hi] @ X.T + sq[None, :]
        np.maximum(d2, 0.0, out=d2)
        d = np.sqrt(d2)
        for j, c in enumerate(uniq):
            sum_to[lo:hi, j] = d[:, labels == c].sum(axis=1)
    own = np.searchsorted(uniq, labels)
    scores = np.zeros(n)
    for i in range(n):
        j = own[i]
        n_own = counts[j]
        if n_own <= 1:
            continue
        a = sum_to[i, j] / (n_own - 1)
        b = np.inf
        for jj in range(uniq.size):
            if jj != j:
                b = min(b, sum_to[i, jj] / counts[jj])
        m = max(a, b)
        scores[i] = 0.0 if m == 0.0 else (b - a) / m
    return float(scores.mean())


def select_cluster_features(
    matrix: np.ndarray, response_labels: np.ndarray, percentile: float = 90.0
) -> np.ndarray:
    """Indices of the feature columns whose |point-biserial| correlation with
    the response label reaches the given percentile."""
    r = np.abs(point_biserial_columns(response_labels, matrix))
    threshold = np.percentile(r, percentile)
    return np.flatnonzero(r >= threshold)


@dataclass
class ClusterSummary:
    cluster: int
    size: int
    receptivity_rate: float
    mean_affect: float
    mean_pa: float
    mean_na: float


@dataclass
class ClusterReport:
    k: int
    assignments: np.ndarray
    clusters: list[ClusterSummary]
    silhouette: float
    anova_f: float
    anova_p: float
    chi2_stat: float
    chi2_p: float
    low_receptivity_cluster: int
    affect_gap_points: float
    silhouette_by_k: list[tuple[int, float]] = field(default_factory=list)
    feature_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
