"""Tree-ensemble learners, built here rather than imported.

Public surface re-exported for convenience; submodules hold the detail:
tree (single CART-style grower), forest (bagging + grid search), boosting
(Newton-step gradient boosting), model (shared ensemble container + JSON),
attribution (path-walk feature contributions).
"""

from .attribution import path_contributions
from .boosting import (
    GbdtParams,
    NonPositiveLearningRate,
    balanced_class_weights,
    fit_gbdt,
    prune_surrogate,
)
from .forest import HyperGrid, RfParams, TooFewRows, fit_random_forest, grid_search_cv
from .model import (
    ArityMismatch,
    KOutOfRange,
    TreeEnsembleModel,
    load_model,
    model_from_json_dict,
    predict_score,
    predict_scores,
    raw_margin,
    raw_margins,
    save_model,
)
from .tree import EmptyData, TreeNode, TreeParams, fit_decision_tree, tree_predict

__all__ = [
    "ArityMismatch",
    "EmptyData",
    "GbdtParams",
    "HyperGrid",
    "KOutOfRange",
    "NonPositiveLearningRate",
    "RfParams",
    "TooFewRows",
    "TreeEnsembleModel",
    "TreeNode",
    "TreeParams",
    "balanced_class_weights",
    "fit_decision_tree",
    "fit_gbdt",
    "fit_random_forest",
    "grid_search_cv",
    "load_model",
    "model_from_json_dict",
    "path_contributions",
    "predict_score",
    "predict_scores",
    "prune_surrogate",
    "raw_margin",
    "raw_margins",
    "save_model",
    "tree_predict",
]
