"""Single decision tree, grown best-first.

Splits are chosen greedily: weighted Gini for classification targets, weighted
squared error for the regression trees boosting fits on Newton targets.
Candidate thresholds sit halfway between consecutive distinct sorted feature
values.  Ties break toward the lowest feature index, then the lowest
threshold.  Every node stores the training-weighted mean target of its
subtree, which is what leaves predict and what path attributions walk over.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from ..core import NettwinError

# Gains at or below this are treated as no improvement; keeps float dust from
# splitting pure nodes.
GAIN_EPS = 1e-12


class EmptyData(NettwinError):
    """A learner was fit on zero rows or zero columns."""


@dataclass
class TreeParams:
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    max_leaves: int | None = None

    def __post_init__(self) -> None:
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1 or None, got {self.max_depth}")
        if self.min_samples_split < 2:
            raise ValueError(f"min_samples_split must be >= 2, got {self.min_samples_split}")
        if self.min_samples_leaf < 1:
            raise ValueError(f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")
        if self.max_leaves is not None and self.max_leaves < 1:
            raise ValueError(f"max_leaves must be >= 1 or None, got {self.max_leaves}")


@dataclass
class TreeNode:
    """feature < 0 marks a leaf; value is the subtree's weighted mean target."""

    value: float
    feature: int = -1
    threshold: float = math.nan
    left: TreeNode | None = None
    right: TreeNode | None = None

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


def _best_split(
    X: np.ndarray,
    t: np.ndarray,
    w: np.ndarray,
    idx: np.ndarray,
    criterion: str,
    min_leaf: int,
    feature_ids: np.ndarray,
) -> tuple[float, int, float] | None:
    """Best (gain, feature, threshold) for one node, or None if nothing helps."""
    n = idx.size
    tv = t[idx]
    if tv.min() == tv.max():
        return None
    wv = w[idx]
    best: tuple[float, int, float] | None = None
    for f in feature_ids:
        xv = X[idx, f]
        order = np.argsort(xv, kind="stable")
        xs = xv[order]
        ws = wv[order]
        ts = tv[order]
        boundaries = np.flatnonzero(xs[1:] != xs[:-1])
        if boundaries.size == 0:
            continue
        left_rows = boundaries + 1
        valid = (left_rows >= min_leaf) & ((n - left_rows) >= min_leaf)
        boundaries = boundaries[valid]
        if boundaries.size == 0:
            continue

        cw = np.cumsum(ws)
        cwt = np.cumsum(ws * ts)
        W, S = cw[-1], cwt[-1]
        WL = cw[boundaries]
        SL = cwt[boundaries]
        WR = W - WL
        SR = S - SL
        if criterion == "mse":
            gains = SL * SL / WL + SR * SR / WR - S * S / W
        else:  # gini; t holds 0/1 labels so cwt is the positive weight
            def impurity(weight: np.ndarray, pos: np.ndarray) -> np.ndarray:
                neg = weight - pos
                return weight - (pos * pos + neg * neg) / weight

            gains = impurity(W, S) - impurity(WL, SL) - impurity(WR, SR)

        k = int(np.argmax(gains))  # first max: lowest threshold wins ties
        gain = float(gains[k])
        if best is None or gain > best[0]:
            b = boundaries[k]
            threshold = (xs[b] + xs[b + 1]) / 2.0
            best = (gain, int(f), float(threshold))
    if best is None or best[0] <= GAIN_EPS:
        return None
    return best


def fit_decision_tree(
    X: np.ndarray,
    t: np.ndarray,
    sample_weight: np.ndarray | None = None,
    params: TreeParams | None = None,
    criterion: str = "gini",
    rng: np.random.Generator | None = None,
    mtry: int | None = None,
) -> TreeNode:
    """Grow one tree best-first (largest gain split next) until the caps bind.

    mtry, when set, samples that many candidate features per split from rng;
    this is what bagging uses.  Without caps, best-first and depth-first grow
    the same tree, so the ordering only matters under max_leaves.
    """
    X = np.asarray(X, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise EmptyData(f"need a non-empty 2-D matrix, got shape {X.shape}")
    if t.shape[0] != X.shape[0]:
        raise EmptyData(f"targets ({t.shape[0]}) do not match rows ({X.shape[0]})")
    if criterion not in ("gini", "mse"):
        raise ValueError(f"criterion must be gini or mse, got {criterion!r}")
    params = params or TreeParams()
    w = (
        np.ones(X.shape[0], dtype=np.float64)
        if sample_weight is None
        else np.asarray(sample_weight, dtype=np.float64)
    )
    if (w <= 0).any():
        raise ValueError("sample weights must be positive")
    d = X.shape[1]

    def candidate_features() -> np.ndarray:
        if mtry is None or mtry >= d:
            return np.arange(d)
        if rng is None:
            raise ValueError("mtry requires an rng")
        return np.sort(rng.choice(d, size=mtry, replace=False))

    def node_value(idx: np.ndarray) -> float:
        wv = w[idx]
        return float(np.sum(wv * t[idx]) / np.sum(wv))

    root = TreeNode(value=node_value(np.arange(X.shape[0])))
    heap: list[tuple[float, int, TreeNode, np.ndarray, int, int, float]] = []
    push_count = 0

    def consider(node: TreeNode, idx: np.ndarray, depth: int) -> None:
        nonlocal push_count
        if idx.size < params.min_samples_split:
            return
        if params.max_depth is not None and depth >= params.max_depth:
            return
        found = _best_split(
            X, t, w, idx, criterion, params.min_samples_leaf, candidate_features()
        )
        if found is None:
            return
        gain, feature, threshold = found
        heapq.heappush(heap, (-gain, push_count, node, idx, depth, feature, threshold))
        push_count += 1

    consider(root, np.arange(X.shape[0]), 0)
    leaves = 1
    while heap:
        if params.max_leaves is not None and leaves >= params.max_leaves:
            break
        _, _, node, idx, depth, feature, threshold = heapq.heappop(heap)
        mask = X[idx, feature] < threshold
        left_idx, right_idx = idx[mask], idx[~mask]
        node.feature = feature
        node.threshold = threshold
        node.left = TreeNode(value=node_value(left_idx))
        node.right = TreeNode(value=node_value(right_idx))
        leaves += 1
        consider(node.left, left_idx, depth + 1)
        consider(node.right, right_idx, depth + 1)
    return root


# -------------------------------------------------------------- prediction


def tree_predict(node: TreeNode, x: np.ndarray) -> float:
    while not node.is_leaf:
        node = node.left if x[node.feature] < node.threshold else node.right
    return node.value


def tree_predict_batch(root: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0], dtype=np.float64)
    stack: list[tuple[TreeNode, np.ndarray]] = [(root, np.arange(X.shape[0]))]
    while stack:
        node, idx = stack.pop()
        if idx.size == 0:
            continue
        if node.is_leaf:
            out[idx] = node.value
            continue
        mask = X[idx, node.feature] < node.threshold
        stack.append((node.left, idx[mask]))
        stack.append((node.right, idx[~mask]))
    return out


# ------------------------------------------------------------ serialization


def tree_to_nodes(root: TreeNode) -> list[dict]:
    """Flatten to a list of {feature, threshold, left, right, value} records."""
    nodes: list[dict] = []

    def walk(node: TreeNode) -> int:
        slot = len(nodes)
        nodes.append({})
        if node.is_leaf:
            nodes[slot] = {
                "feature": -1,
                "threshold": None,
                "left": -1,
                "right": -1,
                "value": node.value,
            }
        else:
            left = walk(node.left)
            right = walk(node.right)
            nodes[slot] = {
                "feature": node.feature,
                "threshold": node.threshold,
                "left": left,
                "right": right,
                "value": node.value,
            }
        return slot

    walk(root)
    return nodes


def tree_from_nodes(nodes: list[dict]) -> TreeNode:
    def build(i: int) -> TreeNode:
        rec = nodes[i]
        if rec["feature"] < 0:
            return TreeNode(value=float(rec["value"]))
        return TreeNode(
            value=float(rec["value"]),
            feature=int(rec["feature"]),
            threshold=float(rec["threshold"]),
            left=build(int(rec["left"])),
            right=build(int(rec["right"])),
        )

    return build(0)
