"""Versioned JSON container for trained models and fitted transforms.

Arrays are stored as nested lists with shortest round-trip float text, so a
save/load/save cycle is byte-identical and files stay diffable.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..timeseries import NormStats
from .forest import ForestModel, ForestParams, Tree
from .net import HeteroNet
from .pca import PcaTransform

FORMAT_VERSION = 1


def _arr(a: np.ndarray) -> list:
    return np.asarray(a).tolist()


def _encode(obj) -> dict:
    if isinstance(obj, ForestModel):
        return {
            "kind": "forest",
            "task": obj.task,
            "n_features": obj.n_features,
            "params": {
                "n_estimators": obj.params.n_estimators,
                "max_depth": obj.params.max_depth,
                "min_samples_leaf": obj.params.min_samples_leaf,
                "min_samples_split": obj.params.min_samples_split,
                "max_features_rule": obj.params.max_features_rule,
            },
            "class_weights": (
                None
                if obj.class_weights is None
                else {str(k): v for k, v in sorted(obj.class_weights.items())}
            ),
            "trees": [
                {
                    "feature": _arr(t.feature),
                    "threshold": _arr(t.threshold),
                    "left": _arr(t.left),
                    "right": _arr(t.right),
                    "value": _arr(t.value),
                }
                for t in obj.trees
            ],
        }
    if isinstance(obj, HeteroNet):
        return {
            "kind": "net",
            "head": obj.head,
            "hidden": list(obj.hidden),
            "weights": [_arr(w) for w in obj.weights],
            "biases": [_arr(b) for b in obj.biases],
        }
    if isinstance(obj, PcaTransform):
        return {
            "kind": "pca",
            "components": _arr(obj.components),
            "mean": _arr(obj.mean),
            "retained_count": obj.retained_count,
            "explained_variance": _arr(obj.explained_variance),
            "explained_fractions": _arr(obj.explained_fractions),
        }
    if isinstance(obj, NormStats):
        return {"kind": "norm", "mean": _arr(obj.mean), "std": _arr(obj.std)}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _decode(doc: dict):
    kind = doc["kind"]
    if kind == "forest":
        return ForestModel(
            trees=[
                Tree(
                    feature=np.asarray(t["feature"], dtype=np.int32),
                    threshold=np.asarray(t["threshold"], dtype=float),
                    left=np.asarray(t["left"], dtype=np.int32),
                    right=np.asarray(t["right"], dtype=np.int32),
                    value=np.asarray(t["value"], dtype=float),
                )
                for t in doc["trees"]
            ],
            task=doc["task"],
            params=ForestParams(**doc["params"]),
            n_features=doc["n_features"],
            class_weights=(
                None
                if doc["class_weights"] is None
                else {int(k): float(v) for k, v in doc["class_weights"].items()}
            ),
        )
    if kind == "net":
        return HeteroNet(
            weights=[np.asarray(w, dtype=float) for w in doc["weights"]],
            biases=[np.asarray(b, dtype=float) for b in doc["biases"]],
            head=doc["head"],
            hidden=tuple(doc["hidden"]),
        )
    if kind == "pca":
        return PcaTransform(
            components=np.asarray(doc["components"], dtype=float),
            mean=np.asarray(doc["mean"], dtype=float),
            retained_count=int(doc["retained_count"]),
            explained_variance=np.asarray(doc["explained_variance"], dtype=float),
            explained_fractions=np.asarray(doc["explained_fractions"], dtype=float),
        )
    if kind == "norm":
        return NormStats(
            mean=np.asarray(doc["mean"], dtype=float),
            std=np.asarray(doc["std"], dtype=float),
        )
    raise ValueError(f"unknown container kind {kind!r}")


def save_model(path: str | Path, obj) -> None:
    doc = {"format_version": FORMAT_VERSION, **_encode(obj)}
    Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")


def load_model(path: str | Path):
    doc = json.loads(Path(path).read_text())
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported container version {version!r}")
    return _decode(doc)
