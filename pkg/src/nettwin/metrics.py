"""Recall-weighted evaluation metrics for anomaly scores.

Everything here works on plain score and label arrays; nothing imports the
learners, so the learners can import this module for their objectives.  F-beta
uses beta=2 throughout because a missed anomaly costs more than a false page.
AUC is computed two independent ways, the Mann-Whitney rank statistic and the
trapezoid under the ROC curve, and the two must agree to 1e-9 before either
is reported.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .core import ConfusionCounts, NettwinError

AUC_AGREEMENT_TOL = 1e-9
DEFAULT_BETA = 2.0
CONSTRAINED_P_MIN = 0.20
CONSTRAINED_R_MIN = 0.50
GRIDSCAN_POINTS = np.linspace(0.05, 0.95, 100)

THRESHOLD_STRATEGIES = ("f2max", "constrained", "gridscan")


class NoFeasibleThreshold(NettwinError):
    """No candidate threshold satisfies the precision and recall floors."""


class UndefinedMetric(NettwinError):
    """Metric needs both classes present (e.g. AUC on single-class labels)."""


def _as_binary(y: np.ndarray | Sequence) -> np.ndarray:
    return (np.asarray(y) > 0).astype(np.int64)


def classify(scores: np.ndarray, threshold: float) -> np.ndarray:
    """Predict positive iff score >= threshold."""
    return (np.asarray(scores, dtype=np.float64) >= threshold).astype(np.int64)


def confusion(y_true: np.ndarray, y_pred: np.ndarray) -> ConfusionCounts:
    yt = _as_binary(y_true)
    yp = _as_binary(y_pred)
    if yt.shape != yp.shape:
        raise ValueError(f"shape mismatch: {yt.shape} vs {yp.shape}")
    return ConfusionCounts(
        tp=int(np.sum((yt == 1) & (yp == 1))),
        fp=int(np.sum((yt == 0) & (yp == 1))),
        fn=int(np.sum((yt == 1) & (yp == 0))),
        tn=int(np.sum((yt == 0) & (yp == 0))),
    )


def precision_recall_fbeta(
    counts: ConfusionCounts, beta: float = DEFAULT_BETA
) -> tuple[float, float, float]:
    """(precision, recall, f-beta), each 0.0 on an empty denominator."""
    p = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    r = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    b2 = beta * beta
    f = (1 + b2) * p * r / (b2 * p + r) if p + r else 0.0
    return p, r, f


def fbeta_at(
    y_true: np.ndarray,
    scores: np.ndarray,
    threshold: float,
    beta: float = DEFAULT_BETA,
) -> float:
    return precision_recall_fbeta(
        confusion(y_true, classify(scores, threshold)), beta
    )[2]


# --------------------------------------------------------------------- AUC


def _average_ranks(v: np.ndarray) -> np.ndarray:
    """1-based ranks, tied values sharing their group's mean rank."""
    order = np.argsort(v, kind="stable")
    sv = v[order]
    new_group = np.concatenate(([True], sv[1:] != sv[:-1]))
    group = np.cumsum(new_group) - 1
    sizes = np.bincount(group)
    ends = np.cumsum(sizes).astype(np.float64)
    avg = ends - (sizes - 1) / 2.0
    ranks = np.empty(v.size, dtype=np.float64)
    ranks[order] = avg[group]
    return ranks


def auc_rank(y_true: np.ndarray, scores: np.ndarray) -> float:
    """Mann-Whitney statistic: P(score_pos > score_neg) + 0.5 P(tie)."""
    y = _as_binary(y_true)
    scores = np.asarray(scores, dtype=np.float64)
    pos = int(np.sum(y == 1))
    neg = y.size - pos
    if pos == 0 or neg == 0:
        raise UndefinedMetric("AUC needs at least one row of each class")
    ranks = _average_ranks(scores)
    return float((np.sum(ranks[y == 1]) - pos * (pos + 1) / 2.0) / (pos * neg))


def roc_points(
    y_true: np.ndarray, scores: np.ndarray
) -> list[tuple[float, float, float]]:
    """(fpr, tpr, threshold) per distinct score descending, anchored (0,0,inf)."""
    y = _as_binary(y_true)
    scores = np.asarray(scores, dtype=np.float64)
    pos = int(np.sum(y == 1))
    neg = y.size - pos
    order = np.argsort(-scores, kind="stable")
    ys = y[order]
    ss = scores[order]
    last_of_group = np.concatenate((ss[1:] != ss[:-1], [True]))
    tp_cum = np.cumsum(ys)
    fp_cum = np.cumsum(1 - ys)
    out = [(0.0, 0.0, math.inf)]
    for i in np.flatnonzero(last_of_group):
        fpr = fp_cum[i] / neg if neg else 0.0
        tpr = tp_cum[i] / pos if pos else 0.0
        out.append((float(fpr), float(tpr), float(ss[i])))
    return out


def auc_trapezoid(y_true: np.ndarray, scores: np.ndarray) -> float:
    y = _as_binary(y_true)
    pos = int(np.sum(y == 1))
    if pos == 0 or pos == y.size:
        raise UndefinedMetric("AUC needs at least one row of each class")
    pts = roc_points(y_true, scores)
    fpr = np.asarray([p[0] for p in pts])
    tpr = np.asarray([p[1] for p in pts])
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def auc_score(y_true: np.ndarray, scores: np.ndarray) -> float:
    """Rank AUC, cross-checked against the trapezoid value."""
    by_rank = auc_rank(y_true, scores)
    by_area = auc_trapezoid(y_true, scores)
    if abs(by_rank - by_area) > AUC_AGREEMENT_TOL:
        raise UndefinedMetric(
            f"AUC implementations disagree: rank={by_rank!r} trapezoid={by_area!r}"
        )
    return by_rank


def pr_points(
    y_true: np.ndarray, scores: np.ndarray
) -> list[tuple[float, float, float]]:
    """(threshold, precision, recall) per distinct score descending."""
    y = _as_binary(y_true)
    scores = np.asarray(scores, dtype=np.float64)
    pos = int(np.sum(y == 1))
    order = np.argsort(-scores, kind="stable")
    ys = y[order]
    ss = scores[order]
    last_of_group = np.concatenate((ss[1:] != ss[:-1], [True]))
    tp_cum = np.cumsum(ys)
    out = []
    for i in np.flatnonzero(last_of_group):
        tp = int(tp_cum[i])
        predicted = i + 1
        precision = tp / predicted
        recall = tp / pos if pos else 0.0
        out.append((float(ss[i]), float(precision), float(recall)))
    return out


# --------------------------------------------------------- threshold choice


def select_threshold(
    y_true: np.ndarray,
    scores: np.ndarray,
    strategy: str = "f2max",
    p_min: float = CONSTRAINED_P_MIN,
    r_min: float = CONSTRAINED_R_MIN,
    beta: float = DEFAULT_BETA,
) -> float:
    """Pick a decision threshold from validation scores.

    f2max: distinct score maximizing F-beta, ties to the larger threshold.
    constrained: largest threshold with precision >= p_min and recall >= r_min.
    gridscan: F-beta argmax over a fixed 100-point grid, ties to larger.
    """
    y = _as_binary(y_true)
    scores = np.asarray(scores, dtype=np.float64)
    if y.size == 0:
        raise ValueError("cannot select a threshold from zero rows")
    if strategy in ("f2max", "constrained"):
        candidates = np.unique(scores)[::-1]
    elif strategy == "gridscan":
        candidates = GRIDSCAN_POINTS[::-1]
    else:
        raise ValueError(f"strategy must be one of {THRESHOLD_STRATEGIES}, got {strategy!r}")

    if strategy == "constrained":
        for tau in candidates:
            p, r, _ = precision_recall_fbeta(confusion(y, classify(scores, tau)), beta)
            if p >= p_min and r >= r_min:
                return float(tau)
        raise NoFeasibleThreshold(
            f"no threshold reaches precision >= {p_min} and recall >= {r_min}"
        )

    best_tau = None
    best_f = -1.0
    for tau in candidates:
        f = precision_recall_fbeta(confusion(y, classify(scores, tau)), beta)[2]
        if f > best_f:
            best_f = f
            best_tau = float(tau)
    return best_tau


# ------------------------------------------------------------------ report


def evaluation_report(
    y_true: np.ndarray, scores: np.ndarray, threshold: float
) -> dict:
    y = _as_binary(y_true)
    counts = confusion(y, classify(scores, threshold))
    p, r, f2 = precision_recall_fbeta(counts)
    try:
        auc = auc_score(y, scores)
    except UndefinedMetric:
        auc = None
    return {
        "n": int(y.size),
        "positives": int(np.sum(y == 1)),
        "threshold": float(threshold),
        "counts": counts.to_json_dict(),
        "precision": p,
        "recall": r,
        "f2": f2,
        "auc": auc,
        "roc": [
            {"fpr": fpr, "tpr": tpr, "threshold": None if math.isinf(t) else t}
            for fpr, tpr, t in roc_points(y, scores)
        ],
        "pr": [
            {"threshold": t, "precision": pp, "recall": rr}
            for t, pp, rr in pr_points(y, scores)
        ],
    }


def write_curves_csv(path: str, report: dict) -> None:
    """Flatten both curves to curve,threshold,x,y rows (ROC x=fpr, PR x=recall)."""
    lines = ["curve,threshold,x,y"]
    for pt in report["roc"]:
        thr = "" if pt["threshold"] is None else repr(pt["threshold"])
        lines.append(f"roc,{thr},{pt['fpr']!r},{pt['tpr']!r}")
    for pt in report["pr"]:
        lines.append(f"pr,{pt['threshold']!r},{pt['recall']!r},{pt['precision']!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def render_curves_svg(report: dict) -> str:
    """Small static two-panel SVG (ROC left, PR right) for eyeballing runs."""

    def panel(x0: float, pts: list[tuple[float, float]], title: str) -> str:
        w, h, pad = 280.0, 240.0, 30.0
        sx = lambda v: x0 + pad + v * (w - 2 * pad)
        sy = lambda v: pad + (1.0 - v) * (h - 2 * pad)
        poly = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        return (
            f'<rect x="{x0 + pad:.2f}" y="{pad:.2f}" width="{w - 2 * pad:.2f}" '
            f'height="{h - 2 * pad:.2f}" fill="none" stroke="#999"/>'
            f'<text x="{x0 + w / 2:.2f}" y="16" text-anchor="middle" '
            f'font-family="monospace" font-size="12">{title}</text>'
            f'<polyline points="{poly}" fill="none" stroke="#1c6ef2" stroke-width="1.5"/>'
        )

    roc_xy = [(pt["fpr"], pt["tpr"]) for pt in report["roc"]]
    pr_xy = [(pt["recall"], pt["precision"]) for pt in report["pr"]]
    auc = report.get("auc")
    roc_title = "ROC" if auc is None else f"ROC (AUC {auc:.4f})"
    body = panel(0.0, roc_xy, roc_title) + panel(280.0, pr_xy, f"PR (F2 {report['f2']:.4f})")
    return (
        '<svg xmlns="http://www.w3.org/2000/svg" width="560" height="240" '
        f'viewBox="0 0 560 240">{body}</svg>'
    )


# --------------------------------------------------- reported-metrics audit

# Externally reported benchmark rows (method label, precision, recall,
# reported F2).  The audit recomputes F2 from the published precision and
# recall and flags rows whose reported value does not reproduce.
REPORTED_BENCHMARK_ROWS: tuple[tuple[str, float, float, float], ...] = (
    ("random_forest", 0.868, 0.918, 0.904),
    ("random_forest_tuned", 0.890, 0.920, 0.912),
    ("gradient_boosted_trees", 0.200, 0.996, 0.560),
    ("gradient_boosted_trees_gpu", 0.615, 0.952, 0.822),
    ("mlp", 0.863, 0.866, 0.913),
    ("deep_sequence_model", 0.025, 0.193, 0.083),
)

AUDIT_TOL = 0.01


def audit_reported_metrics(
    rows: Sequence[tuple[str, float, float, float]] = REPORTED_BENCHMARK_ROWS,
    beta: float = DEFAULT_BETA,
    tol: float = AUDIT_TOL,
) -> list[dict]:
    out = []
    b2 = beta * beta
    for name, p, r, reported in rows:
        recomputed = (1 + b2) * p * r / (b2 * p + r) if p + r else 0.0
        diff = abs(recomputed - reported)
        out.append(
            {
                "name": name,
                "precision": p,
                "recall": r,
                "reported_fbeta": reported,
                "recomputed_fbeta": recomputed,
                "abs_diff": diff,
                "consistent": diff <= tol,
            }
        )
    return out
