"""Offline pipeline stages: simulate, label, preprocess, train, evaluate.

Each stage reads files, writes files, and returns a small summary dict for
the CLI to print.  All outputs go through write-then-rename so an interrupted
stage never leaves a truncated artifact, and nothing here reads the clock:
given the same inputs and seed, every stage writes byte-identical files.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .core import DeviceSnapshot, LabelingConfig, NettwinError
from .labeling import (
    LabeledTable,
    label_table,
    load_flow_csv,
    table_from_snapshots,
    write_labeled_csv,
)
from .learn import (
    GbdtParams,
    HyperGrid,
    RfParams,
    fit_gbdt,
    fit_random_forest,
    grid_search_cv,
    load_model,
    path_contributions,
    predict_scores,
    save_model,
)
from .metrics import (
    UndefinedMetric,
    auc_score,
    evaluation_report,
    fbeta_at,
    render_curves_svg,
    select_threshold,
    write_curves_csv,
)
from .netsim import load_scenario_spec, run_scenario
from .preprocess import (
    FeatureMatrix,
    PreprocessArtifact,
    SchemaMismatch,
    artifact_from_json_dict,
    fit_scaler,
    load_artifact,
    load_matrix_csv,
    prepare_features,
    random_undersample,
    stratified_split,
    transform_matrix,
    write_matrix_csv,
)

LEARNERS = ("gbdt", "rf", "rf-gs")


def atomic_write_text(path: str | Path, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_json(path: str | Path, doc: dict) -> None:
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ------------------------------------------------------------------ stages


def stage_simulate(
    spec_path: str, out_dir: str, seed: int, duration: float | None = None
) -> dict:
    spec = load_scenario_spec(spec_path)
    if duration is None:
        with open(spec_path, encoding="utf-8") as fh:
            duration = json.load(fh).get("duration")
        if duration is None:
            raise NettwinError(
                "duration missing: pass --duration or put it in the scenario file"
            )
    snapshots, truth = run_scenario(spec, float(duration), seed=seed, out_dir=out_dir)
    return {
        "snapshots": str(snapshots),
        "truth": str(truth),
        "devices": spec.topology.switches + spec.topology.hosts,
        "duration": float(duration),
    }


def _load_table(in_path: str, profile: str) -> LabeledTable:
    """Accept a CSV, a snapshots.ndjson, or a directory holding one."""
    p = Path(in_path)
    if p.is_dir():
        return table_from_snapshots(p / "snapshots.ndjson", p / "truth.json")
    if p.suffix == ".ndjson":
        return table_from_snapshots(p, p.with_name("truth.json"))
    return load_flow_csv(p, profile)


def stage_label(
    in_path: str,
    out_path: str,
    profile: str = "simulator",
    horizon: float = 15.0,
    dt_period: float = 5.0,
) -> dict:
    table = _load_table(in_path, profile)
    table = label_table(table, LabelingConfig(horizon=horizon, dt_period=dt_period))
    tmp = f"{out_path}.tmp"
    write_labeled_csv(table, tmp)
    os.replace(tmp, out_path)
    return {
        "rows": len(table),
        "positives": int(np.sum(table.label_t15)),
        "out": str(out_path),
    }


def stage_preprocess(
    in_csv: str, out_matrix: str, out_artifact: str, profile: str = "simulator"
) -> dict:
    table = load_flow_csv(in_csv, profile)
    if "label_t15" not in table.columns:
        raise NettwinError(f"{in_csv}: no label_t15 column; run the label stage first")
    table.label_t15 = np.array(
        [int(v) for v in table.column_values("label_t15")], dtype=np.int8
    )
    matrix, artifact = prepare_features(table, profile)
    tmp = f"{out_matrix}.tmp"
    write_matrix_csv(matrix, tmp)
    os.replace(tmp, out_matrix)
    write_json(out_artifact, artifact.to_json_dict())
    return {
        "rows": int(matrix.X.shape[0]),
        "columns": list(matrix.names),
        "dropped_rows": matrix.dropped_rows,
        "positives": int(np.sum(matrix.y)),
    }


def _training_frames(
    matrix: FeatureMatrix, val_fraction: float, seed: int, scaler_kind: str
) -> tuple[FeatureMatrix, FeatureMatrix, object]:
    """Split, fit the scaler on the training side only, scale both, balance."""
    train, val = stratified_split(matrix, val_fraction, seed=seed)
    scaler = fit_scaler(train, kind=scaler_kind)
    train_scaled = transform_matrix(train, scaler)
    val_scaled = transform_matrix(val, scaler)
    balanced = random_undersample(train_scaled, seed=seed)
    return balanced, val_scaled, scaler


def _fit_learner(
    learner: str,
    balanced: FeatureMatrix,
    seed: int,
    gbdt_params: GbdtParams | None,
    rf_params: RfParams | None,
    grid: HyperGrid | None,
):
    """Returns (model, extra report fragment)."""
    y = balanced.y.astype(np.float64)
    if learner == "gbdt":
        model = fit_gbdt(
            balanced.X, y, params=gbdt_params or GbdtParams(),
            feature_names=balanced.names, seed=seed,
        )
        return model, {}
    if learner == "rf":
        model = fit_random_forest(
            balanced.X, y, params=rf_params or RfParams(),
            feature_names=balanced.names, seed=seed,
        )
        return model, {}
    if learner == "rf-gs":
        best, report = grid_search_cv(balanced.X, y, grid or HyperGrid(), seed=seed)
        model = fit_random_forest(
            balanced.X, y, params=best, feature_names=balanced.names, seed=seed
        )
        return model, {"grid_search": report}
    raise NettwinError(f"learner must be one of {LEARNERS}, got {learner!r}")


def _finish_model(model, artifact: PreprocessArtifact, scaler, val, strategy, learner, seed):
    val_scores = predict_scores(model, val.X)
    model.decision_threshold = select_threshold(val.y, val_scores, strategy)
    model.preprocessing = PreprocessArtifact(
        profile=artifact.profile,
        kept_columns=artifact.kept_columns,
        encoding_maps=artifact.encoding_maps,
        scaler=scaler,
    ).to_json_dict()
    model.params = dict(model.params, learner=learner, strategy=strategy, seed=seed)
    try:
        val_auc = auc_score(val.y, val_scores)
    except UndefinedMetric:
        val_auc = None
    return {
        "learner": learner,
        "threshold": model.decision_threshold,
        "validation_f2": fbeta_at(val.y, val_scores, model.decision_threshold),
        "validation_auc": val_auc,
        "validation_rows": int(val.X.shape[0]),
    }


def stage_train(
    matrix_path: str,
    artifact_path: str,
    model_out: str,
    learner: str = "gbdt",
    strategy: str = "f2max",
    val_fraction: float = 0.2,
    seed: int = 0,
    scaler_kind: str = "standard",
    gbdt_params: GbdtParams | None = None,
    rf_params: RfParams | None = None,
    grid: HyperGrid | None = None,
) -> dict:
    matrix = load_matrix_csv(matrix_path)
    artifact = load_artifact(artifact_path)
    if tuple(matrix.names) != tuple(artifact.kept_columns):
        raise SchemaMismatch(
            f"matrix columns {matrix.names} do not match artifact {artifact.kept_columns}"
        )
    balanced, val, scaler = _training_frames(matrix, val_fraction, seed, scaler_kind)
    model, extra = _fit_learner(learner, balanced, seed, gbdt_params, rf_params, grid)
    summary = _finish_model(model, artifact, scaler, val, strategy, learner, seed)
    summary.update(extra)
    summary["train_rows"] = int(balanced.X.shape[0])
    save_model(model, model_out)
    summary["model"] = str(model_out)
    return summary


def stage_select_model(
    matrix_path: str,
    artifact_path: str,
    model_out: str,
    report_out: str,
    strategy: str = "f2max",
    val_fraction: float = 0.2,
    seed: int = 0,
    scaler_kind: str = "standard",
    gbdt_params: GbdtParams | None = None,
    rf_params: RfParams | None = None,
    grid: HyperGrid | None = None,
) -> dict:
    """Train all three learners on one split and keep the best validation F2.

    Candidates run in fixed order with ties going to the later one, so equal
    scores prefer the boosted model.
    """
    matrix = load_matrix_csv(matrix_path)
    artifact = load_artifact(artifact_path)
    if tuple(matrix.names) != tuple(artifact.kept_columns):
        raise SchemaMismatch(
            f"matrix columns {matrix.names} do not match artifact {artifact.kept_columns}"
        )
    balanced, val, scaler = _training_frames(matrix, val_fraction, seed, scaler_kind)
    candidates = []
    best = None
    for learner in ("rf", "rf-gs", "gbdt"):
        model, _ = _fit_learner(learner, balanced, seed, gbdt_params, rf_params, grid)
        summary = _finish_model(model, artifact, scaler, val, strategy, learner, seed)
        candidates.append(summary)
        if best is None or summary["validation_f2"] >= best[1]["validation_f2"]:
            best = (model, summary)
    model, summary = best
    save_model(model, model_out)
    # Persisted report carries no filesystem paths: reruns must be
    # byte-identical no matter where the outputs land.
    report = {
        "winner": summary["learner"],
        "strategy": strategy,
        "seed": seed,
        "candidates": candidates,
    }
    write_json(report_out, report)
    return {**report, "model": str(model_out)}


def stage_evaluate(model_path: str, matrix_path: str, out_dir: str) -> dict:
    model = load_model(model_path)
    if model.preprocessing is None:
        raise NettwinError(f"{model_path}: model carries no preprocessing recipe")
    artifact = artifact_from_json_dict(model.preprocessing)
    matrix = load_matrix_csv(matrix_path)
    if tuple(matrix.names) != tuple(artifact.kept_columns):
        raise SchemaMismatch(
            f"matrix columns {matrix.names} do not match model {artifact.kept_columns}"
        )
    if artifact.scaler is not None:
        matrix = transform_matrix(matrix, artifact.scaler)
    scores = predict_scores(model, matrix.X)
    report = evaluation_report(matrix.y, scores, model.decision_threshold)
    report["model_version"] = model.version

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "report.json", report)
    tmp = out / "curves.csv.tmp"
    write_curves_csv(str(tmp), report)
    os.replace(tmp, out / "curves.csv")
    atomic_write_text(out / "curves.svg", render_curves_svg(report) + "\n")
    return report


def stage_attribute(model_path: str, matrix_path: str, out_csv: str) -> dict:
    model = load_model(model_path)
    if model.preprocessing is None:
        raise NettwinError(f"{model_path}: model carries no preprocessing recipe")
    artifact = artifact_from_json_dict(model.preprocessing)
    matrix = load_matrix_csv(matrix_path)
    if tuple(matrix.names) != tuple(artifact.kept_columns):
        raise SchemaMismatch(
            f"matrix columns {matrix.names} do not match model {artifact.kept_columns}"
        )
    if artifact.scaler is not None:
        matrix = transform_matrix(matrix, artifact.scaler)
    scores = predict_scores(model, matrix.X)
    lines = [
        ",".join(["row", "label_t15", "score", "base"] + list(matrix.names))
    ]
    for i, (x, y, score) in enumerate(zip(matrix.X, matrix.y, scores)):
        base, contribs = path_contributions(model, x)
        cells = [str(i), str(int(y)), repr(float(score)), repr(base)]
        cells.extend(repr(float(c)) for c in contribs)
        lines.append(",".join(cells))
    atomic_write_text(out_csv, "\n".join(lines) + "\n")
    return {"rows": int(matrix.X.shape[0]), "out": str(out_csv)}


def stage_replay(
    model_path: str,
    labeled_csv: str,
    out_predictions: str,
    config=None,
    callback_url: str | None = None,
) -> dict:
    """Feed a labeled simulator CSV through the twin as if it were live."""
    from .service import RetrainFailed, TwinConfig, TwinService

    model = load_model(model_path)
    if config is None:
        config = TwinConfig(mode="replay")
    table = load_flow_csv(labeled_csv, "simulator")
    if "label_t15" not in table.columns:
        raise NettwinError(f"{labeled_csv}: no label_t15 column; replay needs labels")
    labels = [int(v) for v in table.column_values("label_t15")]

    service = TwinService(
        config,
        model,
        sim=None,
        callback_url=callback_url,
        predictions_path=out_predictions,
    )
    idx = {name: i for i, name in enumerate(table.columns)}
    retrains = 0
    try:
        current_ts: float | None = None
        for row, ts, label in zip(table.cells, table.ts, labels):
            if current_ts is not None and ts > current_ts:
                try:
                    if service.maybe_retrain() is not None:
                        retrains += 1
                except RetrainFailed:
                    pass  # old model stays active; keep replaying
            current_ts = ts
            snap = DeviceSnapshot(
                ts=float(ts),
                device_id=row[idx["device_id"]],
                flow_count=int(float(row[idx["flow_count"]])),
                total_packets=int(float(row[idx["total_packets"]])),
                total_bytes=int(float(row[idx["total_bytes"]])),
                avg_packet_size=float(row[idx["avg_packet_size"]]),
                link_count=int(float(row[idx["link_count"]])),
            )
            pred = service.ingest_snapshot(snap)
            service.buffer_labeled(service.feature_mapping(snap), label)
            del pred
        try:
            if service.maybe_retrain() is not None:
                retrains += 1
        except RetrainFailed:
            pass
    finally:
        service.close()
    return {
        "rows": len(table),
        "retrains": retrains,
        "final_version": service.model_version,
        "predictions": str(out_predictions),
    }
