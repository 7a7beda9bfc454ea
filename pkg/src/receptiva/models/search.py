"""Exhaustive hyperparameter search with event-grouped inner validation."""

from __future__ import annotations

import itertools

import numpy as np

from .forest import ForestParams, forest_predict, forest_train
from .metrics import evaluate

DEFAULT_GRID: dict[str, list] = {
    "n_estimators": [20, 40, 60, 80],
    "max_depth": [3, 5, 10, None],
    "min_samples_leaf": [1, 2, 4],
    "min_samples_split": [2, 4, 8],
    "max_features_rule": ["sqrt", "log2", "all"],
}

SMALL_GRID: dict[str, list] = {
    "n_estimators": [40, 60],
    "max_depth": [3, 5],
    "min_samples_leaf": [2],
    "min_samples_split": [2],
    "max_features_rule": ["sqrt"],
}


def grid_size(grid: dict[str, list]) -> int:
    n = 1
    for values in grid.values():
        n *= len(values)
    return n


def _event_folds(event_ids: np.ndarray, k: int, seed: int) -> list[np.ndarray]:
    """Round-robin whole events into k folds, shuffled deterministically."""
    events = np.unique(event_ids)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 77])))
    perm = events[rng.permutation(events.size)]
    fold_of_event = {int(e): i % k for i, e in enumerate(perm)}
    assignment = np.array([fold_of_event[int(e)] for e in event_ids])
    return [np.flatnonzero(assignment == f) for f in range(k)]


def _depth_key(depth) -> float:
    return float("inf") if depth is None else float(depth)


def grid_search(
    X: np.ndarray,
    y: np.ndarray,
    event_ids: np.ndarray,
    task: str,
    grid: dict[str, list] | None = None,
    k_inner: int = 3,
    seed: int = 0,
) -> dict:
    """Pick forest hyperparameters by inner validation F1 (classify) or RMSE.

    Every grid permutation is evaluated; ties fall to fewer estimators, then
    shallower depth, then the lexicographically smallest remaining values,
    making the outcome independent of grid enumeration order.
    """
    grid = DEFAULT_GRID if grid is None else grid
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("grid must be non-empty")
    folds = [f for f in _event_folds(event_ids, k_inner, seed) if f.size]
    if len(folds) < 2:
        raise ValueError("rows do not support an inner train/validation split")
    keys = sorted(grid)
    best = None
    for combo in itertools.product(*(grid[k] for k in keys)):
        params_dict = dict(zip(keys, combo))
        params = ForestParams(**params_dict)
        scores = []
        for i, val_rows in enumerate(folds):
            train_rows = np.concatenate([f for j, f in enumerate(folds) if j != i])
            if task == "classify" and np.unique(y[train_rows]).size < 2:
                continue
            model = forest_train(X[train_rows], y[train_rows], task, params, seed=seed)
            pred = forest_predict(model, X[val_rows])
            m = evaluate(pred, y[val_rows], task)
            scores.append(m["f1"] if task == "classify" else m["rmse"])
        if not scores:
            continue
        mean_score = float(np.mean(scores))
        goodness = mean_score if task == "classify" else -mean_score
        rank = (
            -goodness,
            params.n_estimators,
            _depth_key(params.max_depth),
            params.min_samples_leaf,
            params.min_samples_split,
            params.max_features_rule,
        )
        if best is None or rank < best[0]:
            best = (rank, params_dict)
    if best is None:
        raise ValueError("no grid point could be evaluated")
    return best[1]
