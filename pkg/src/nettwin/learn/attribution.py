"""Per-prediction feature attributions from decision paths.

Walking a tree from root to leaf, each branch moves the running estimate from
the node's subtree mean to the chosen child's subtree mean; that delta is
credited to the feature tested at the node.  Summing credits over all trees
(scaled by learning rate for boosted models, averaged for bagged ones) makes
base plus contributions reproduce the raw margin exactly.
"""

from __future__ import annotations

import numpy as np

from .model import TreeEnsembleModel, predict_score, raw_margin


def path_contributions(
    model: TreeEnsembleModel, x: np.ndarray
) -> tuple[float, np.ndarray]:
    """(base, per-feature contributions); base + sum == raw margin."""
    x = np.asarray(x, dtype=np.float64)
    model._check_arity(x.shape[0])
    contribs = np.zeros(len(model.feature_names), dtype=np.float64)
    root_total = 0.0
    for tree in model.trees:
        node = tree
        root_total += node.value
        while not node.is_leaf:
            child = node.left if x[node.feature] < node.threshold else node.right
            contribs[node.feature] += child.value - node.value
            node = child
    if model.mode == "boosted":
        base = model.base_score + model.learning_rate * root_total
        contribs *= model.learning_rate
    elif model.trees:
        base = root_total / len(model.trees)
        contribs /= len(model.trees)
    else:
        base = 0.5
    return float(base), contribs


def attribution_report(model: TreeEnsembleModel, x: np.ndarray) -> dict:
    """JSON-friendly attribution, features ordered by |contribution| desc."""
    base, contribs = path_contributions(model, x)
    order = np.argsort(-np.abs(contribs), kind="stable")
    return {
        "base": base,
        "margin": raw_margin(model, x),
        "score": predict_score(model, x),
        "contributions": [
            {"feature": model.feature_names[i], "value": float(x[i]), "contribution": float(contribs[i])}
            for i in order
        ],
    }
