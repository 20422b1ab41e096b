"""Gradient boosting for binary logistic loss.

Each round fits a regression tree to the Newton step -g/h with Hessian row
weights, so the weighted-MSE leaf mean equals -sum(g)/sum(h) exactly and no
separate leaf refit is needed.  Class imbalance is handled by scaling each
row's loss by N / (2 * N_class), which makes the weighted positive rate 0.5
and the initial log-odds 0 on any data with both classes present.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import NettwinError
from .model import KOutOfRange, TreeEnsembleModel, sigmoid
from .tree import EmptyData, TreeParams, fit_decision_tree, tree_predict_batch

# Hessians p*(1-p) vanish as predictions saturate; floor keeps -g/h finite.
HESSIAN_FLOOR = 1e-12
PROB_CLIP = 1e-12


class NonPositiveLearningRate(NettwinError):
    """Boosting requires learning_rate > 0."""


@dataclass
class GbdtParams:
    rounds: int = 300
    learning_rate: float = 0.1
    max_depth: int = 6
    num_leaves_cap: int = 31
    min_samples_leaf: int = 1

    def __post_init__(self) -> None:
        if self.rounds < 0:
            raise ValueError(f"rounds must be >= 0, got {self.rounds}")
        if self.learning_rate <= 0:
            raise NonPositiveLearningRate(
                f"learning_rate must be > 0, got {self.learning_rate}"
            )
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.num_leaves_cap < 2:
            raise ValueError(f"num_leaves_cap must be >= 2, got {self.num_leaves_cap}")


def balanced_class_weights(y: np.ndarray) -> np.ndarray:
    """Per-row weight N / (2 * N_class); all-ones when one class is absent."""
    y = np.asarray(y)
    n = y.shape[0]
    pos = int(np.sum(y == 1))
    neg = n - pos
    if pos == 0 or neg == 0:
        return np.ones(n, dtype=np.float64)
    w = np.where(y == 1, n / (2.0 * pos), n / (2.0 * neg))
    return w.astype(np.float64)


def fit_gbdt(
    X: np.ndarray,
    y: np.ndarray,
    params: GbdtParams | None = None,
    feature_names: tuple[str, ...] | None = None,
    class_weight: str | None = "balanced",
    seed: int = 0,
) -> TreeEnsembleModel:
    """Train a boosted ensemble.  Deterministic: seed is accepted only so all
    learners share one signature."""
    del seed
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise EmptyData(f"need a non-empty 2-D matrix, got shape {X.shape}")
    if y.shape[0] != X.shape[0]:
        raise EmptyData(f"labels ({y.shape[0]}) do not match rows ({X.shape[0]})")
    params = params or GbdtParams()
    names = feature_names or tuple(f"f{i}" for i in range(X.shape[1]))

    if class_weight == "balanced":
        w = balanced_class_weights(y)
    elif class_weight is None:
        w = np.ones(X.shape[0], dtype=np.float64)
    else:
        raise ValueError(f"class_weight must be 'balanced' or None, got {class_weight!r}")

    rate = float(np.sum(w * y) / np.sum(w))
    rate = min(max(rate, PROB_CLIP), 1.0 - PROB_CLIP)
    base_score = math.log(rate / (1.0 - rate))

    tree_params = TreeParams(
        max_depth=params.max_depth,
        min_samples_leaf=params.min_samples_leaf,
        max_leaves=params.num_leaves_cap,
    )
    margins = np.full(X.shape[0], base_score, dtype=np.float64)
    trees = []
    for _ in range(params.rounds):
        p = np.clip(sigmoid(margins), PROB_CLIP, 1.0 - PROB_CLIP)
        g = (p - y) * w
        h = np.maximum(p * (1.0 - p) * w, HESSIAN_FLOOR)
        targets = -g / h
        tree = fit_decision_tree(X, targets, sample_weight=h, params=tree_params, criterion="mse")
        trees.append(tree)
        margins += params.learning_rate * tree_predict_batch(tree, X)
    return TreeEnsembleModel(
        mode="boosted",
        trees=trees,
        feature_names=names,
        learning_rate=params.learning_rate,
        base_score=base_score,
        params={
            "rounds": params.rounds,
            "learning_rate": params.learning_rate,
            "max_depth": params.max_depth,
            "num_leaves_cap": params.num_leaves_cap,
            "class_weight": class_weight,
        },
    )


def prune_surrogate(model: TreeEnsembleModel, k: int) -> TreeEnsembleModel:
    """First-k-trees surrogate sharing base score, rate, and threshold."""
    if model.mode != "boosted":
        raise ValueError("surrogates are defined for boosted models only")
    if not 0 <= k <= model.n_trees:
        raise KOutOfRange(f"k must be in [0, {model.n_trees}], got {k}")
    return TreeEnsembleModel(
        mode="boosted",
        trees=list(model.trees[:k]),
        feature_names=model.feature_names,
        learning_rate=model.learning_rate,
        base_score=model.base_score,
        decision_threshold=model.decision_threshold,
        preprocessing=model.preprocessing,
        params=dict(model.params, surrogate_k=k),
        surrogate_of=model.version,
        version=model.version,
    )
