"""Live digital twin runtime.

Scores every incoming snapshot against the active model, holds scored rows
until their forecast horizon has passed and the ground truth for that window
is knowable, accumulates the matured rows in a sliding training buffer, and
retrains plus hot-swaps the model once enough new rows have matured since the
last swap.

The active model lives behind a single immutable handle.  Scorers read the
handle exactly once per prediction and use only what it carries, so a
concurrent swap can never mix two models inside one prediction.  Swaps and
retraining serialize on their own lock; reads never take it.
"""

from __future__ import annotations

import json
import math
import queue
import threading
import time
import urllib.error
import urllib.request
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import (
    DeviceSnapshot,
    MitigationCommand,
    NettwinError,
    Prediction,
    normalize_action,
    validate_snapshot,
)
from .learn import GbdtParams, fit_gbdt, path_contributions, predict_score
from .learn.model import TreeEnsembleModel, predict_scores
from .metrics import NoFeasibleThreshold, select_threshold
from .netsim import SimState
from .preprocess import (
    FeatureMatrix,
    PreprocessArtifact,
    artifact_from_json_dict,
    fit_scaler,
    apply_scaler,
    random_undersample,
    stratified_split,
    vector_from_mapping,
)

SERVICE_MODES = ("live-sim", "replay")


class IncompatibleModel(NettwinError):
    """Replacement model does not match the active feature contract."""


class RetrainFailed(NettwinError):
    """Retraining could not produce a usable model; the old one stays."""


class ControllerUnreachable(NettwinError):
    """No controller is attached to forward mitigations to."""


def _utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class ModelHandle:
    """Immutable (model, version) pair; read it once, use only what you read.

    trained_at is runtime bookkeeping for the API; it is never written into
    model artifacts, which stay byte-deterministic.
    """

    model: TreeEnsembleModel
    version: int
    trained_at: str

    @property
    def artifact(self) -> PreprocessArtifact:
        if self.model.preprocessing is None:
            raise IncompatibleModel("model carries no preprocessing recipe")
        return artifact_from_json_dict(self.model.preprocessing)


@dataclass(frozen=True)
class RetrainPolicy:
    buffer_threshold: int = 5000

    def __post_init__(self) -> None:
        if self.buffer_threshold < 1:
            raise ValueError(
                f"buffer_threshold must be >= 1, got {self.buffer_threshold}"
            )


@dataclass
class TwinConfig:
    horizon: float = 15.0
    dt_period: float = 5.0
    retrain: RetrainPolicy = field(default_factory=RetrainPolicy)
    strategy: str = "f2max"
    model_params: dict = field(default_factory=dict)
    mode: str = "live-sim"
    paths: dict[str, str] = field(default_factory=dict)
    seed: int = 0
    tick_wall_seconds: float | None = None

    def __post_init__(self) -> None:
        if self.mode not in SERVICE_MODES:
            raise ValueError(f"mode must be one of {SERVICE_MODES}, got {self.mode!r}")
        if self.horizon <= 0 or self.dt_period <= 0:
            raise ValueError("horizon and dt_period must be positive")

    def gbdt_params(self) -> GbdtParams:
        known = {"rounds", "learning_rate", "max_depth", "num_leaves_cap", "min_samples_leaf"}
        return GbdtParams(**{k: v for k, v in self.model_params.items() if k in known})


def twin_config_from_json_dict(doc: dict) -> TwinConfig:
    retrain = doc.get("retrain") or {}
    return TwinConfig(
        horizon=float(doc.get("horizon", 15.0)),
        dt_period=float(doc.get("dt_period", 5.0)),
        retrain=RetrainPolicy(int(retrain.get("buffer_threshold", 5000))),
        strategy=str(doc.get("strategy", "f2max")),
        model_params=dict(doc.get("model_params") or {}),
        mode=str(doc.get("mode", "live-sim")),
        paths={k: str(v) for k, v in (doc.get("paths") or {}).items()},
        seed=int(doc.get("seed", 0)),
        tick_wall_seconds=(
            None if doc.get("tick_wall_seconds") is None else float(doc["tick_wall_seconds"])
        ),
    )


def load_twin_config(path: str | Path) -> TwinConfig:
    with open(path, encoding="utf-8") as fh:
        return twin_config_from_json_dict(json.load(fh))


class TwinService:
    """In-process twin: ingest, mature, retrain, mitigate, publish."""

    def __init__(
        self,
        config: TwinConfig,
        model: TreeEnsembleModel,
        sim: SimState | None = None,
        callback_url: str | None = None,
        predictions_path: str | Path | None = None,
        mitigations_path: str | Path | None = None,
    ):
        if model.preprocessing is None:
            raise IncompatibleModel("model carries no preprocessing recipe")
        self.config = config
        self.sim = sim
        self.callback_url = callback_url
        self._handle = ModelHandle(
            model=model, version=max(model.version, 1), trained_at=_utc_now_iso()
        )
        model.version = self._handle.version

        self._state_lock = threading.Lock()
        self._swap_lock = threading.RLock()
        self.latest_snapshots: dict[str, DeviceSnapshot] = {}
        self.latest_predictions: dict[str, Prediction] = {}
        self._pending: deque[tuple[float, str, dict]] = deque()
        self._buffer: deque[tuple[dict, int]] = deque(
            maxlen=config.retrain.buffer_threshold
        )
        self.records_since_retrain = 0
        self.mitigation_log: list[dict] = []
        self.retrain_log: list[dict] = []

        self._subscribers: list[queue.Queue] = []
        self._pred_fh = None
        if predictions_path is not None:
            self._pred_fh = open(predictions_path, "a", encoding="utf-8")
        self._mit_fh = None
        if mitigations_path is not None:
            self._mit_fh = open(mitigations_path, "a", encoding="utf-8")

    # ------------------------------------------------------------- handles

    @property
    def handle(self) -> ModelHandle:
        return self._handle

    @property
    def model_version(self) -> int:
        return self._handle.version

    def close(self) -> None:
        for fh in (self._pred_fh, self._mit_fh):
            if fh is not None:
                fh.close()

    # ------------------------------------------------------------- scoring

    @staticmethod
    def feature_mapping(snap: DeviceSnapshot) -> dict:
        doc = snap.to_json_dict()
        doc.pop("ts", None)
        doc.pop("device_id", None)
        return doc

    def ingest_snapshot(self, snap: DeviceSnapshot) -> Prediction:
        """Score one snapshot with the active model and publish the result."""
        snap = validate_snapshot(snap)
        handle = self._handle  # the one read; everything below uses `handle`
        mapping = self.feature_mapping(snap)
        vec = vector_from_mapping(handle.artifact, mapping)
        score = predict_score(handle.model, vec)
        pred = Prediction(
            ts=snap.ts,
            device_id=snap.device_id,
            score=score,
            label_pred=int(score >= handle.model.decision_threshold),
            model_version=handle.version,
        )
        with self._state_lock:
            previous = self.latest_predictions.get(snap.device_id)
            if previous is not None and snap.ts <= previous.ts:
                raise NettwinError(
                    f"out-of-order snapshot for {snap.device_id}: "
                    f"{snap.ts} after {previous.ts}"
                )
            self.latest_snapshots[snap.device_id] = snap
            self.latest_predictions[snap.device_id] = pred
            self._pending.append((snap.ts, snap.device_id, mapping))
        self._publish(pred)
        return pred

    def attribution_for(self, device_id: str) -> dict:
        """Margin-scale attribution of the device's latest snapshot."""
        with self._state_lock:
            snap = self.latest_snapshots.get(device_id)
            pred = self.latest_predictions.get(device_id)
        if snap is None or pred is None:
            raise KeyError(device_id)
        handle = self._handle
        vec = vector_from_mapping(handle.artifact, self.feature_mapping(snap))
        base, contribs = path_contributions(handle.model, vec)
        return {
            "device_id": device_id,
            "ts": snap.ts,
            "score": predict_score(handle.model, vec),
            "base_value": base,
            "contributions": [
                {"feature": name, "value": float(c)}
                for name, c in sorted(
                    zip(handle.model.feature_names, contribs),
                    key=lambda pair: -abs(pair[1]),
                )
            ],
        }

    # ---------------------------------------------------------- maturation

    def _window_has_attacked_tick(
        self, lo: float, intervals: Sequence[Sequence[float]]
    ) -> bool:
        """True iff some tick in (lo, lo + horizon] falls in an attack interval.

        Snapshots land on multiples of dt_period and attack intervals are
        half-open [start, end), so this reproduces the offline labeler's
        row predicate exactly: the smallest tick that is both > lo and
        >= start decides the whole window.
        """
        dt = self.config.dt_period
        hi = lo + self.config.horizon
        next_tick = dt * (math.floor(lo / dt) + 1)
        if next_tick <= lo:  # float-division guard
            next_tick += dt
        for start, end in intervals:
            first = max(next_tick, dt * math.ceil(start / dt))
            if first < end and first <= hi:
                return True
        return False

    def mature_and_buffer(
        self,
        truth: Mapping[str, Sequence[Sequence[float]]] | None = None,
        now: float | None = None,
    ) -> int:
        """Finalize labels for rows whose horizon has fully elapsed.

        A row at ts matures once now >= ts + horizon; by then every tick of
        its forecast window has been simulated, so the label is final.
        """
        horizon = self.config.horizon
        if now is None:
            now = self.sim.clock if self.sim is not None else time.time()
        truth = truth or {}
        matured = 0
        while True:
            with self._state_lock:
                if not self._pending or self._pending[0][0] + horizon > now:
                    break
                ts, device_id, mapping = self._pending.popleft()
            label = int(self._window_has_attacked_tick(ts, truth.get(device_id, ())))
            with self._state_lock:
                self._buffer.append((mapping, label))
                self.records_since_retrain += 1
            matured += 1
        return matured

    # ------------------------------------------------------------ retrains

    def maybe_retrain(self) -> int | None:
        """Retrain and hot-swap once enough new rows matured; else no-op.

        The trigger counts rows matured since the last swap, not buffer size:
        the sliding buffer stays full forever after the first fill, and a
        size trigger would retrain on every tick.
        """
        with self._swap_lock:
            threshold = self.config.retrain.buffer_threshold
            if self.records_since_retrain < threshold or len(self._buffer) < threshold:
                return None
            with self._state_lock:
                rows = list(self._buffer)
                self.records_since_retrain = 0
            labels = np.array([label for _, label in rows], dtype=np.int8)
            if labels.min() == labels.max():
                raise RetrainFailed("training buffer holds a single class")

            old = self._handle
            bare = PreprocessArtifact(
                profile=old.artifact.profile,
                kept_columns=old.artifact.kept_columns,
                encoding_maps=old.artifact.encoding_maps,
                scaler=None,
            )
            X = np.array(
                [vector_from_mapping(bare, mapping) for mapping, _ in rows],
                dtype=np.float64,
            )
            matrix = FeatureMatrix(names=bare.kept_columns, X=X, y=labels)
            seed = self.config.seed + old.version
            try:
                train, val = stratified_split(matrix, 0.2, seed=seed)
                scaler_kind = (
                    old.artifact.scaler.kind if old.artifact.scaler is not None else "standard"
                )
                scaler = fit_scaler(train, kind=scaler_kind)
                train = FeatureMatrix(
                    names=train.names, X=apply_scaler(train.X, scaler), y=train.y
                )
                val = FeatureMatrix(
                    names=val.names, X=apply_scaler(val.X, scaler), y=val.y
                )
                balanced = random_undersample(train, seed=seed)
                model = fit_gbdt(
                    balanced.X,
                    balanced.y.astype(np.float64),
                    params=self.config.gbdt_params(),
                    feature_names=bare.kept_columns,
                    seed=seed,
                )
                val_scores = predict_scores(model, val.X)
                model.decision_threshold = select_threshold(
                    val.y, val_scores, self.config.strategy
                )
            except (NoFeasibleThreshold, NettwinError, ValueError) as exc:
                raise RetrainFailed(f"retraining failed: {exc}") from exc
            model.preprocessing = PreprocessArtifact(
                profile=bare.profile,
                kept_columns=bare.kept_columns,
                encoding_maps=bare.encoding_maps,
                scaler=scaler,
            ).to_json_dict()
            version = self.hot_swap_model(model)
            self.retrain_log.append(
                {
                    "version": version,
                    "rows": len(rows),
                    "positives": int(labels.sum()),
                    "threshold": model.decision_threshold,
                    "at": _utc_now_iso(),
                }
            )
            return version

    def hot_swap_model(self, new_model: TreeEnsembleModel) -> int:
        """Atomically replace the active model; returns the new version."""
        with self._swap_lock:
            old = self._handle
            if tuple(new_model.feature_names) != tuple(old.model.feature_names):
                raise IncompatibleModel(
                    f"feature lists differ: {new_model.feature_names} "
                    f"vs {old.model.feature_names}"
                )
            if new_model.preprocessing is None:
                raise IncompatibleModel("model carries no preprocessing recipe")
            version = old.version + 1
            new_model.version = version
            self._handle = ModelHandle(
                model=new_model, version=version, trained_at=_utc_now_iso()
            )
            return version

    # ----------------------------------------------------------- mitigation

    def mitigate(self, device_id: str, action: str) -> dict:
        """Forward a mitigation to the attached controller and log it."""
        action = normalize_action(action)
        issued_at = self.sim.clock if self.sim is not None else time.time()
        cmd = MitigationCommand(device_id=device_id, action=action, issued_at=issued_at)
        if self.sim is not None:
            receipt = self.sim.apply_mitigation(cmd)
        elif self.callback_url:
            receipt = self._forward_mitigation(cmd)
        else:
            raise ControllerUnreachable("no controller attached and no callback URL")
        entry = dict(receipt)
        entry["model_version"] = self._handle.version
        entry["issued_at"] = issued_at
        self.mitigation_log.append(entry)
        if self._mit_fh is not None:
            self._mit_fh.write(json.dumps(entry, sort_keys=True) + "\n")
            self._mit_fh.flush()
        return entry

    def _forward_mitigation(self, cmd: MitigationCommand) -> dict:
        body = json.dumps(cmd.to_json_dict()).encode()
        req = urllib.request.Request(
            self.callback_url, data=body, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(req, timeout=5.0) as resp:
                payload = resp.read()
        except (urllib.error.URLError, OSError) as exc:
            raise ControllerUnreachable(f"controller callback failed: {exc}") from exc
        try:
            return json.loads(payload)
        except json.JSONDecodeError:
            return {"receipt_id": None, "applied_at": cmd.issued_at}

    # ------------------------------------------------------------- stepping

    def step(self) -> list[Prediction]:
        """One live-sim tick: advance, score everything, mature, maybe swap."""
        if self.sim is None:
            raise NettwinError("step() requires an attached simulator")
        snaps = self.sim.advance_tick()
        preds = [self.ingest_snapshot(s) for s in snaps]
        self.mature_and_buffer(self.sim.scheduled_truth(), now=self.sim.clock)
        try:
            self.maybe_retrain()
        except RetrainFailed as exc:
            self.retrain_log.append({"error": str(exc), "at": _utc_now_iso()})
        return preds

    def buffer_labeled(self, mapping: dict, label: int) -> None:
        """Replay path: the truth label arrived with the row itself."""
        with self._state_lock:
            self._buffer.append((mapping, int(label)))
            self.records_since_retrain += 1

    # ------------------------------------------------------------ streaming

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=4096)
        with self._state_lock:
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._state_lock:
            if q in self._subscribers:
                self._subscribers.remove(q)

    def _publish(self, pred: Prediction) -> None:
        if self._pred_fh is not None:
            self._pred_fh.write(json.dumps(pred.to_json_dict(), sort_keys=True) + "\n")
            self._pred_fh.flush()
        with self._state_lock:
            targets = list(self._subscribers)
        for q in targets:
            try:
                q.put_nowait(pred)
            except queue.Full:
                pass  # slow consumer loses events rather than stalling scoring

    # ------------------------------------------------------------- queries

    def device_rows(self) -> list[dict]:
        """Operator table: one row per device with its latest prediction."""
        with self._state_lock:
            snaps = dict(self.latest_snapshots)
            preds = dict(self.latest_predictions)
        rows = []
        for device_id in sorted(snaps):
            snap = snaps[device_id]
            pred = preds.get(device_id)
            rows.append(
                {
                    "device_id": device_id,
                    "flow_count": snap.flow_count,
                    "total_packets": snap.total_packets,
                    "total_bytes": snap.total_bytes,
                    "avg_packet_size": snap.avg_packet_size,
                    "link_count": snap.link_count,
                    "prediction": None
                    if pred is None
                    else {
                        "score": pred.score,
                        "label": pred.label_pred,
                        "model_version": pred.model_version,
                        "ts": pred.ts,
                    },
                }
            )
        return rows

    def model_info(self) -> dict:
        handle = self._handle
        return {
            "version": handle.version,
            "params": handle.model.params,
            "threshold": handle.model.decision_threshold,
            "trained_at": handle.trained_at,
        }
