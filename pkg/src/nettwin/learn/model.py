"""Serializable tree-ensemble model.

One container covers both learners: mode "boosted" sums tree outputs on top
of a base margin and squashes through a sigmoid, mode "bagged" averages tree
votes that already live in [0, 1].  The JSON artifact embeds the
preprocessing recipe so a saved model is a complete scoring function from a
raw feature mapping to a probability.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..core import NettwinError
from .tree import TreeNode, tree_from_nodes, tree_predict, tree_predict_batch, tree_to_nodes

MODEL_MODES = ("boosted", "bagged")


class ArityMismatch(NettwinError):
    """A feature vector's width does not match the model's feature names."""


class KOutOfRange(NettwinError):
    """Surrogate size k must lie in [0, number of trees]."""


def sigmoid(z: np.ndarray | float) -> np.ndarray | float:
    return 1.0 / (1.0 + np.exp(-np.asarray(z, dtype=np.float64)))


@dataclass
class TreeEnsembleModel:
    mode: str
    trees: list[TreeNode]
    feature_names: tuple[str, ...]
    learning_rate: float = 1.0
    base_score: float = 0.0
    decision_threshold: float = 0.5
    preprocessing: dict | None = None
    params: dict = field(default_factory=dict)
    surrogate_of: int | None = None
    version: int = 1

    def __post_init__(self) -> None:
        if self.mode not in MODEL_MODES:
            raise ValueError(f"mode must be one of {MODEL_MODES}, got {self.mode!r}")
        if not 0.0 <= self.decision_threshold <= 1.0:
            raise ValueError(f"decision_threshold out of [0, 1]: {self.decision_threshold}")

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def _check_arity(self, width: int) -> None:
        if width != len(self.feature_names):
            raise ArityMismatch(
                f"model expects {len(self.feature_names)} features, got {width}"
            )


# ----------------------------------------------------------------- scoring


def raw_margin(model: TreeEnsembleModel, x: np.ndarray) -> float:
    """Pre-squash output: base + lr * sum(trees) boosted, mean(trees) bagged."""
    x = np.asarray(x, dtype=np.float64)
    model._check_arity(x.shape[0])
    votes = [tree_predict(tree, x) for tree in model.trees]
    if model.mode == "boosted":
        return model.base_score + model.learning_rate * float(sum(votes))
    if not votes:
        return 0.5
    return float(sum(votes)) / len(votes)


def raw_margins(model: TreeEnsembleModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ArityMismatch(f"need a 2-D matrix, got shape {X.shape}")
    model._check_arity(X.shape[1])
    if not model.trees:
        fill = model.base_score if model.mode == "boosted" else 0.5
        return np.full(X.shape[0], fill, dtype=np.float64)
    votes = np.zeros(X.shape[0], dtype=np.float64)
    for tree in model.trees:
        votes += tree_predict_batch(tree, X)
    if model.mode == "boosted":
        return model.base_score + model.learning_rate * votes
    return votes / len(model.trees)


def predict_score(model: TreeEnsembleModel, x: np.ndarray) -> float:
    margin = raw_margin(model, x)
    if model.mode == "boosted":
        return float(sigmoid(margin))
    return float(min(max(margin, 0.0), 1.0))


def predict_scores(model: TreeEnsembleModel, X: np.ndarray) -> np.ndarray:
    margins = raw_margins(model, X)
    if model.mode == "boosted":
        return np.asarray(sigmoid(margins), dtype=np.float64)
    return np.clip(margins, 0.0, 1.0)


# ------------------------------------------------------------ serialization


def model_to_json_dict(model: TreeEnsembleModel) -> dict[str, Any]:
    return {
        "version": model.version,
        "mode": model.mode,
        "learning_rate": model.learning_rate,
        "base_score": model.base_score,
        "decision_threshold": model.decision_threshold,
        "feature_names": list(model.feature_names),
        "preprocessing": model.preprocessing,
        "params": model.params,
        "surrogate_of": model.surrogate_of,
        "trees": [{"nodes": tree_to_nodes(t)} for t in model.trees],
    }


def model_from_json_dict(doc: dict[str, Any]) -> TreeEnsembleModel:
    return TreeEnsembleModel(
        mode=doc["mode"],
        trees=[tree_from_nodes(rec["nodes"]) for rec in doc["trees"]],
        feature_names=tuple(doc["feature_names"]),
        learning_rate=float(doc["learning_rate"]),
        base_score=float(doc["base_score"]),
        decision_threshold=float(doc["decision_threshold"]),
        preprocessing=doc.get("preprocessing"),
        params=dict(doc.get("params") or {}),
        surrogate_of=doc.get("surrogate_of"),
        version=int(doc.get("version", 1)),
    )


def save_model(model: TreeEnsembleModel, path: str) -> None:
    """Atomic write: same inputs yield byte-identical files."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(model_to_json_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def load_model(path: str) -> TreeEnsembleModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_json_dict(json.load(fh))
