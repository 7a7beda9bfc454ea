"""Random forest of CART trees (weighted Gini / variance-reduction splits).

Trees grow on bootstrap resamples with a per-node random feature subset.
Classification leaves store the class-weighted positive fraction and the
forest averages leaf values across trees, so prediction order never matters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ForestParams:
    n_estimators: int = 60
    max_depth: int | None = 3
    min_samples_leaf: int = 2
    min_samples_split: int = 2
    max_features_rule: str = "sqrt"   # sqrt | log2 | all

    def n_features_per_split(self, d: int) -> int:
        if self.max_features_rule == "sqrt":
            return max(1, int(np.sqrt(d)))
        if self.max_features_rule == "log2":
            return max(1, int(np.log2(d)))
        if self.max_features_rule == "all":
            return d
        raise ValueError(f"unknown max_features_rule {self.max_features_rule!r}")


@dataclass(eq=False)
class Tree:
    """Array-encoded binary tree; feature -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray


@dataclass(eq=False)
class ForestModel:
    trees: list[Tree]
    task: str
    params: ForestParams
    n_features: int
    class_weights: dict[int, float] | None = None


def inverse_frequency_weights(y: np.ndarray) -> dict[int, float]:
    """Balanced class weights: n / (n_classes * n_c)."""
    labels, counts = np.unique(y, return_counts=True)
    n = y.size
    return {int(lab): n / (labels.size * int(c)) for lab, c in zip(labels, counts)}


def _best_split(x: np.ndarray, y: np.ndarray, w: np.ndarray, task: str, min_leaf: int):
    """Best (score, threshold) for one feature, or None if no legal split."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ys = y[order]
    n = xs.size
    pos = np.arange(1, n)                       # left side takes pos entries
    legal = (xs[:-1] < xs[1:]) & (pos >= min_leaf) & (n - pos >= min_leaf)
    if not legal.any():
        return None
    if task == "classify":
        ws = w[order]
        cw = np.cumsum(ws)[:-1]
        cw1 = np.cumsum(ws * ys)[:-1]
        total_w = float(np.sum(ws))
        total_1 = float(np.sum(ws * ys))
        with np.errstate(divide="ignore", invalid="ignore"):
            p_l = cw1 / cw
            p_r = (total_1 - cw1) / (total_w - cw)
            score = (cw * 2 * p_l * (1 - p_l) + (total_w - cw) * 2 * p_r * (1 - p_r)) / total_w
    else:
        cs = np.cumsum(ys)[:-1]
        cs2 = np.cumsum(ys * ys)[:-1]
        total = float(np.sum(ys))
        total2 = float(np.sum(ys * ys))
        n_l = pos.astype(float)
        n_r = n - n_l
        score = (cs2 - cs * cs / n_l) + ((total2 - cs2) - (total - cs) ** 2 / n_r)
    score = np.where(legal, score, np.inf)
    best = int(np.argmin(score))
    return float(score[best]), 0.5 * (xs[best] + xs[best + 1])


def _grow_tree(X, y, w, boot, rng, params: ForestParams, task: str) -> Tree:
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    stack: list[tuple[np.ndarray, int, int, bool]] = [(boot, 0, -1, False)]
    while stack:
        idx, depth, parent, is_right = stack.pop()
        node_id = len(feature)
        if parent >= 0:
            if is_right:
                right[parent] = node_id
            else:
                left[parent] = node_id
        ys = y[idx]
        ws = w[idx]
        if task == "classify":
            leaf_value = float(np.sum(ws * ys) / np.sum(ws))
            pure = ys.min() == ys.max()
        else:
            leaf_value = float(ys.mean())
            pure = float(ys.var()) == 0.0

        split = None
        if (
            not pure
            and idx.size >= params.min_samples_split
            and idx.size >= 2 * params.min_samples_leaf
            and (params.max_depth is None or depth < params.max_depth)
        ):
            d = X.shape[1]
            feats = rng.permutation(d)[: params.n_features_per_split(d)]
            best_score = np.inf
            for f in feats:
                cand = _best_split(X[idx, f], ys, ws, task, params.min_samples_leaf)
                if cand is not None and cand[0] < best_score:
                    best_score = cand[0]
                    split = (int(f), cand[1])
        if split is None:
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(leaf_value)
            continue
        f, thr = split
        goes_left = X[idx, f] < thr
        feature.append(f)
        threshold.append(thr)
        left.append(-1)
        right.append(-1)
        value.append(leaf_value)
        stack.append((idx[~goes_left], depth + 1, node_id, True))
        stack.append((idx[goes_left], depth + 1, node_id, False))
    return Tree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        value=np.asarray(value, dtype=float),
    )


def forest_train(
    X: np.ndarray,
    y: np.ndarray,
    task: str,
    params: ForestParams = ForestParams(),
    class_weights: dict[int, float] | None = None,
    seed: int = 0,
) -> ForestModel:
    """Fit bootstrap CART trees; classification weights default to inverse
    label frequency."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("X must be a non-empty 2-D matrix")
    if task not in ("classify", "regress"):
        raise ValueError(f"unknown task {task!r}")
    if task == "classify":
        if class_weights is None:
            class_weights = inverse_frequency_weights(y.astype(int))
        w = np.array([class_weights[int(v)] for v in y])
    else:
        class_weights = None
        w = np.ones(y.size)

    trees: list[Tree] = []
    n = X.shape[0]
    for t in range(params.n_estimators):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, t])))
        boot = rng.integers(0, n, size=n)
        trees.append(_grow_tree(X, y, w, boot, rng, params, task))
    return ForestModel(trees=trees, task=task, params=params,
                       n_features=X.shape[1], class_weights=class_weights)


def _tree_predict(tree: Tree, X: np.ndarray) -> np.ndarray:
    node = np.zeros(X.shape[0], dtype=np.int32)
    active = tree.feature[node] >= 0
    while active.any():
        rows = np.flatnonzero(active)
        cur = node[rows]
        goes_left = X[rows, tree.feature[cur]] < tree.threshold[cur]
        node[rows] = np.where(goes_left, tree.left[cur], tree.right[cur])
        active[rows] = tree.feature[node[rows]] >= 0
    return tree.value[node]


def forest_predict(model: ForestModel, X: np.ndarray) -> np.ndarray:
    """Mean of leaf values across trees: P(positive) for classification,
    predicted value for regression."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.n_features:
        raise ValueError("feature count mismatch")
    out = np.zeros(X.shape[0])
    for tree in model.trees:
        out += _tree_predict(tree, X)
    return out / len(model.trees)
