"""Bagged forest learner and hyperparameter grid search.

Bootstrap resampling is done with multiplicity weights instead of row copies:
drawing n row indices and binning them gives each sampled row an integer
weight, which the tree grower consumes directly.  Grid search runs stratified
k-fold cross-validation per cell and picks the cell with the best mean F2 at
the 0.5 threshold, breaking ties toward the lexicographically smallest cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import NettwinError
from ..metrics import fbeta_at
from .model import TreeEnsembleModel, predict_scores
from .tree import EmptyData, TreeParams, fit_decision_tree


class TooFewRows(NettwinError):
    """Stratified folding needs at least k rows of every class."""


@dataclass
class RfParams:
    n_estimators: int = 50
    max_depth: int | None = 10
    min_samples_leaf: int = 1

    def __post_init__(self) -> None:
        if self.n_estimators < 1:
            raise ValueError(f"n_estimators must be >= 1, got {self.n_estimators}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1 or None, got {self.max_depth}")


@dataclass
class HyperGrid:
    n_estimators: tuple[int, ...] = (25, 50, 100)
    max_depth: tuple[int | None, ...] = (5, 10, None)

    def cells(self) -> list[RfParams]:
        """All combinations, ascending; None depth sorts after every number."""
        depths = sorted(set(self.max_depth), key=lambda d: (d is None, d if d is not None else 0))
        sizes = sorted(set(self.n_estimators))
        return [RfParams(n_estimators=n, max_depth=d) for n in sizes for d in depths]


def fit_random_forest(
    X: np.ndarray,
    y: np.ndarray,
    params: RfParams | None = None,
    feature_names: tuple[str, ...] | None = None,
    seed: int | np.random.SeedSequence = 0,
) -> TreeEnsembleModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise EmptyData(f"need a non-empty 2-D matrix, got shape {X.shape}")
    if y.shape[0] != X.shape[0]:
        raise EmptyData(f"labels ({y.shape[0]}) do not match rows ({X.shape[0]})")
    params = params or RfParams()
    names = feature_names or tuple(f"f{i}" for i in range(X.shape[1]))
    n, d = X.shape
    mtry = math.ceil(math.sqrt(d))
    tree_params = TreeParams(
        max_depth=params.max_depth, min_samples_leaf=params.min_samples_leaf
    )
    entropy = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    trees = []
    for child in entropy.spawn(params.n_estimators):
        rng = np.random.default_rng(child)
        counts = np.bincount(rng.integers(0, n, size=n), minlength=n)
        rows = np.flatnonzero(counts)
        trees.append(
            fit_decision_tree(
                X[rows],
                y[rows],
                sample_weight=counts[rows].astype(np.float64),
                params=tree_params,
                criterion="gini",
                rng=rng,
                mtry=mtry,
            )
        )
    return TreeEnsembleModel(
        mode="bagged",
        trees=trees,
        feature_names=names,
        params={
            "n_estimators": params.n_estimators,
            "max_depth": params.max_depth,
            "min_samples_leaf": params.min_samples_leaf,
        },
    )


def stratified_folds(
    y: np.ndarray, k: int, rng: np.random.Generator
) -> list[np.ndarray]:
    """k disjoint index sets covering all rows, each class dealt evenly."""
    y = np.asarray(y)
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in np.unique(y):
        members = np.flatnonzero(y == cls)
        if members.size < k:
            raise TooFewRows(
                f"class {cls!r} has {members.size} rows, need at least {k}"
            )
        members = members[rng.permutation(members.size)]
        per, extra = divmod(members.size, k)
        at = 0
        for i in range(k):
            take = per + (1 if i < extra else 0)
            folds[i].extend(members[at : at + take].tolist())
            at += take
    return [np.sort(np.asarray(f, dtype=np.int64)) for f in folds]


def grid_search_cv(
    X: np.ndarray,
    y: np.ndarray,
    grid: HyperGrid | None = None,
    k: int = 3,
    seed: int = 0,
) -> tuple[RfParams, dict]:
    """Pick forest hyperparameters by mean held-out F2 at threshold 0.5.

    Folds are fixed once up front so every cell sees the same partition.
    Each (cell, fold) fit gets its own seed stream, so adding cells never
    perturbs the others.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    grid = grid or HyperGrid()
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    folds = stratified_folds(y, k, np.random.default_rng(seed))
    all_rows = np.arange(X.shape[0])
    cells = grid.cells()
    report_cells = []
    best_idx = -1
    best_mean = -1.0
    for ci, cell in enumerate(cells):
        fold_scores = []
        for fi, held in enumerate(folds):
            train = np.setdiff1d(all_rows, held, assume_unique=False)
            model = fit_random_forest(
                X[train],
                y[train],
                params=cell,
                seed=np.random.SeedSequence([seed, ci, fi]),
            )
            fold_scores.append(fbeta_at(y[held], predict_scores(model, X[held]), 0.5))
        mean_f2 = float(np.mean(fold_scores))
        report_cells.append(
            {
                "n_estimators": cell.n_estimators,
                "max_depth": cell.max_depth,
                "fold_f2": [float(v) for v in fold_scores],
                "mean_f2": mean_f2,
            }
        )
        if mean_f2 > best_mean:
            best_mean = mean_f2
            best_idx = ci
    best = cells[best_idx]
    report = {
        "objective": "f2_at_0.5",
        "k": k,
        "seed": seed,
        "best": {"n_estimators": best.n_estimators, "max_depth": best.max_depth},
        "best_mean_f2": best_mean,
        "cells": report_cells,
    }
    return best, report
