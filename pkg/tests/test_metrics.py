"""Score metrics: F2, dual-path AUC, curves, threshold strategies, audit."""

import math

import numpy as np
import pytest

from nettwin.core import ConfusionCounts
from nettwin.metrics import (
    NoFeasibleThreshold,
    UndefinedMetric,
    audit_reported_metrics,
    auc_rank,
    auc_score,
    auc_trapezoid,
    classify,
    confusion,
    evaluation_report,
    fbeta_at,
    pr_points,
    precision_recall_fbeta,
    render_curves_svg,
    roc_points,
    select_threshold,
    write_curves_csv,
)

FROZEN_Y = np.array([1, 0, 1, 0])
FROZEN_SCORES = np.array([0.9, 0.8, 0.7, 0.1])


def test_classify_threshold_is_inclusive():
    assert classify(np.array([0.5, 0.49, 0.51]), 0.5).tolist() == [1, 0, 1]


def test_confusion_counts():
    y = np.array([1, 1, 0, 0, 1, 0])
    p = np.array([1, 0, 1, 0, 1, 0])
    c = confusion(y, p)
    assert (c.tp, c.fp, c.fn, c.tn) == (2, 1, 1, 2)


def test_precision_recall_f2_zero_denominators():
    assert precision_recall_fbeta(ConfusionCounts(0, 0, 0, 5)) == (0.0, 0.0, 0.0)
    assert precision_recall_fbeta(ConfusionCounts(0, 3, 0, 2))[0] == 0.0
    assert precision_recall_fbeta(ConfusionCounts(0, 0, 4, 1))[1] == 0.0


def test_f2_weighs_recall_over_precision():
    # Same harmonic ingredients flipped: recall-heavy must score higher F2.
    p_heavy = precision_recall_fbeta(ConfusionCounts(8, 2, 8, 0))[2]   # P=.8 R=.5
    r_heavy = precision_recall_fbeta(ConfusionCounts(8, 8, 2, 0))[2]   # P=.5 R=.8
    assert r_heavy > p_heavy
    p, r, f2 = precision_recall_fbeta(ConfusionCounts(2, 1, 0, 1))
    assert f2 == pytest.approx(5 * p * r / (4 * p + r))


def test_auc_rank_perfect_constant_reversed():
    y = np.array([0, 0, 1, 1])
    assert auc_rank(y, np.array([0.1, 0.2, 0.8, 0.9])) == 1.0
    assert auc_rank(y, np.array([0.5, 0.5, 0.5, 0.5])) == 0.5
    assert auc_rank(y, np.array([0.9, 0.8, 0.2, 0.1])) == 0.0


def test_auc_handles_ties_as_half_credit():
    y = np.array([1, 0, 1, 0])
    s = np.array([0.9, 0.9, 0.3, 0.1])
    # pairs: (.9 vs .9) tie=0.5, (.9 vs .1) win, (.3 vs .9) loss, (.3 vs .1) win
    assert auc_rank(y, s) == pytest.approx(2.5 / 4)


def test_auc_two_paths_agree_on_random_data():
    rng = np.random.default_rng(55)
    for _ in range(40):
        n = int(rng.integers(4, 80))
        y = rng.integers(0, 2, size=n)
        if y.min() == y.max():
            continue
        scores = np.round(rng.uniform(size=n), 2)  # rounding forces ties
        assert auc_rank(y, scores) == pytest.approx(auc_trapezoid(y, scores), abs=1e-9)
        auc_score(y, scores)  # internal agreement check must not raise


def test_auc_requires_both_classes():
    with pytest.raises(UndefinedMetric):
        auc_rank(np.array([1, 1]), np.array([0.1, 0.2]))
    with pytest.raises(UndefinedMetric):
        auc_trapezoid(np.array([0, 0]), np.array([0.1, 0.2]))


def test_roc_anchored_and_complete():
    pts = roc_points(FROZEN_Y, FROZEN_SCORES)
    assert pts[0] == (0.0, 0.0, math.inf)
    assert pts[-1][:2] == (1.0, 1.0)
    # 4 distinct scores -> anchor + 4 points
    assert len(pts) == 5
    fprs = [p[0] for p in pts]
    tprs = [p[1] for p in pts]
    assert fprs == sorted(fprs)
    assert tprs == sorted(tprs)


def test_pr_one_point_per_distinct_score_no_anchor():
    pts = pr_points(np.array([1, 0]), np.array([0.8, 0.4]))
    assert pts == [(0.8, 1.0, 1.0), (0.4, 0.5, 1.0)]

    tied = pr_points(np.array([1, 0, 1]), np.array([0.6, 0.6, 0.2]))
    assert len(tied) == 2  # tied scores collapse to one point
    assert tied[0] == (0.6, 0.5, 0.5)


def test_f2max_on_frozen_example():
    tau = select_threshold(FROZEN_Y, FROZEN_SCORES, "f2max")
    assert tau == 0.7
    assert fbeta_at(FROZEN_Y, FROZEN_SCORES, tau) == pytest.approx(10 / 11)


def test_constrained_on_frozen_example():
    # At 0.9: precision 1.0, recall exactly 0.5; floors are inclusive.
    tau = select_threshold(FROZEN_Y, FROZEN_SCORES, "constrained")
    assert tau == 0.9


def test_constrained_infeasible_raises():
    y = np.array([1, 0, 0, 0, 0, 0])
    scores = np.array([0.1, 0.2, 0.3, 0.4, 0.5, 0.6])  # positive scored last
    with pytest.raises(NoFeasibleThreshold):
        select_threshold(y, scores, "constrained")


def test_gridscan_matches_exhaustive_enumeration():
    tau = select_threshold(FROZEN_Y, FROZEN_SCORES, "gridscan")
    grid = np.linspace(0.05, 0.95, 100)
    best = max(
        grid, key=lambda t: (fbeta_at(FROZEN_Y, FROZEN_SCORES, float(t)), t)
    )
    assert tau == pytest.approx(float(best))
    assert tau == pytest.approx(grid[71])  # largest grid point still <= 0.7


def test_f2max_tie_takes_larger_threshold():
    y = np.array([1, 1, 0])
    scores = np.array([0.9, 0.6, 0.1])
    # tau=0.9: P=1 R=.5 F2=5/9; tau=0.6: P=1 R=1 F2=1; tau=0.1: P=2/3 R=1
    assert select_threshold(y, scores, "f2max") == 0.6
    # Duplicate the winning configuration at two thresholds.
    y2 = np.array([1, 1, 0, 0])
    s2 = np.array([0.9, 0.8, 0.3, 0.2])
    # 0.8 and 0.3 both give P=1..., compute: tau .8 -> TP2 FP0 F2=1; done.
    assert select_threshold(y2, s2, "f2max") == 0.8


def test_unknown_strategy_rejected():
    with pytest.raises(ValueError):
        select_threshold(FROZEN_Y, FROZEN_SCORES, "youden")


def test_evaluation_report_structure():
    report = evaluation_report(FROZEN_Y, FROZEN_SCORES, 0.7)
    assert report["n"] == 4 and report["positives"] == 2
    assert report["counts"] == {"tp": 2, "fp": 1, "fn": 0, "tn": 1}
    assert report["f2"] == pytest.approx(10 / 11)
    assert report["auc"] == 0.75
    assert report["roc"][0]["threshold"] is None  # inf anchor is JSON-safe
    assert len(report["pr"]) == 4


def test_evaluation_report_single_class_auc_null():
    report = evaluation_report(np.array([1, 1]), np.array([0.9, 0.8]), 0.5)
    assert report["auc"] is None
    assert report["recall"] == 1.0


def test_curves_csv_and_svg(tmp_path):
    report = evaluation_report(FROZEN_Y, FROZEN_SCORES, 0.7)
    path = tmp_path / "curves.csv"
    write_curves_csv(str(path), report)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "curve,threshold,x,y"
    assert lines[1].startswith("roc,,")  # anchor row has empty threshold
    assert len(lines) == 1 + 5 + 4

    svg = render_curves_svg(report)
    assert svg.startswith("<svg") and svg.endswith("</svg>")
    assert "polyline" in svg and "AUC 0.7500" in svg


def test_audit_flags_rows_that_do_not_reproduce():
    rows = audit_reported_metrics()
    by_name = {r["name"]: r for r in rows}
    assert by_name["random_forest"]["consistent"]
    assert by_name["random_forest_tuned"]["consistent"]
    assert by_name["gradient_boosted_trees"]["consistent"]
    assert by_name["deep_sequence_model"]["consistent"]
    assert not by_name["mlp"]["consistent"]
    assert not by_name["gradient_boosted_trees_gpu"]["consistent"]
    assert by_name["mlp"]["recomputed_fbeta"] == pytest.approx(0.8654, abs=5e-4)
    assert by_name["gradient_boosted_trees_gpu"]["recomputed_fbeta"] == pytest.approx(
        0.858, abs=5e-4
    )
    # Consistent rows really are close, not merely under a sloppy tolerance.
    assert by_name["random_forest"]["abs_diff"] < 0.005
