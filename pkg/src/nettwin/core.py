"""Shared value types for the forecasting twin: snapshots, flow rows, predictions.

Everything here is an immutable value object with an exact JSON round trip.
Validation that crosses fields (e.g. recomputing avg_packet_size) lives in
explicit functions so loaders can build first and validate second.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any

MITIGATION_ACTIONS = ("drop", "rate_limit", "reroute")

# Snapshot JSON key order is part of the wire contract.
SNAPSHOT_FIELDS = (
    "ts",
    "device_id",
    "flow_count",
    "total_packets",
    "total_bytes",
    "avg_packet_size",
    "link_count",
)
COUNTER_FIELDS = ("flow_count", "total_packets", "total_bytes", "avg_packet_size", "link_count")

# Relative tolerance used when checking a reported avg_packet_size against
# total_bytes / total_packets.
AVG_SIZE_RTOL = 1e-6


class NettwinError(Exception):
    """Base class for all contract violations raised by this package."""


class NegativeCounter(NettwinError):
    """A counter or timestamp is negative or not finite."""


class AvgSizeMismatch(NettwinError):
    """avg_packet_size disagrees with total_bytes / total_packets."""


# ---------------------------------------------------------------- snapshots


@dataclass(frozen=True)
class DeviceSnapshot:
    """One device's per-interval counters at a single twin tick.

    Counters are per-interval deltas, not cumulative totals.  avg_packet_size
    is derived; pass None to have validate_snapshot fill it in.
    """

    ts: float
    device_id: str
    flow_count: int
    total_packets: int
    total_bytes: int
    avg_packet_size: float | None
    link_count: int

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "ts": self.ts,
            "device_id": self.device_id,
            "flow_count": self.flow_count,
            "total_packets": self.total_packets,
            "total_bytes": self.total_bytes,
            "avg_packet_size": self.avg_packet_size,
            "link_count": self.link_count,
        }


def snapshot_from_json_dict(d: dict[str, Any]) -> DeviceSnapshot:
    return DeviceSnapshot(
        ts=float(d["ts"]),
        device_id=str(d["device_id"]),
        flow_count=int(d["flow_count"]),
        total_packets=int(d["total_packets"]),
        total_bytes=int(d["total_bytes"]),
        avg_packet_size=None if d.get("avg_packet_size") is None else float(d["avg_packet_size"]),
        link_count=int(d["link_count"]),
    )


def expected_avg_packet_size(total_bytes: int, total_packets: int) -> float:
    return total_bytes / total_packets if total_packets > 0 else 0.0


def validate_snapshot(snap: DeviceSnapshot) -> DeviceSnapshot:
    """Check counter domains and the avg_packet_size identity.

    Returns a snapshot whose avg_packet_size is always filled in.  Running it
    twice is a no-op on the second pass.
    """
    if not math.isfinite(snap.ts) or snap.ts < 0:
        raise NegativeCounter(f"ts must be finite and non-negative, got {snap.ts!r}")
    for name in ("flow_count", "total_packets", "total_bytes", "link_count"):
        v = getattr(snap, name)
        if v < 0:
            raise NegativeCounter(f"{name} must be non-negative, got {v}")
    expected = expected_avg_packet_size(snap.total_bytes, snap.total_packets)
    if snap.avg_packet_size is None:
        return replace(snap, avg_packet_size=expected)
    got = snap.avg_packet_size
    if not math.isfinite(got) or got < 0:
        raise NegativeCounter(f"avg_packet_size must be finite and non-negative, got {got!r}")
    if abs(got - expected) > AVG_SIZE_RTOL * max(1.0, abs(expected)):
        raise AvgSizeMismatch(
            f"avg_packet_size {got} inconsistent with total_bytes/total_packets {expected}"
        )
    return snap


# ---------------------------------------------------------------- flow rows


@dataclass(frozen=True)
class FlowRecord:
    """One labeled (or not-yet-labeled) flow-table row.

    features is an ordered tuple of (name, value) pairs; the order is fixed
    per table.  label_t15 is None until temporal labeling has run.
    """

    ts: float
    features: tuple[tuple[str, float], ...]
    attack: bool
    label_t15: bool | None = None

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "ts": self.ts,
            "features": [[n, v] for n, v in self.features],
            "attack": self.attack,
            "label_t15": self.label_t15,
        }


def flow_record_from_json_dict(d: dict[str, Any]) -> FlowRecord:
    return FlowRecord(
        ts=float(d["ts"]),
        features=tuple((str(n), float(v)) for n, v in d["features"]),
        attack=bool(d["attack"]),
        label_t15=None if d.get("label_t15") is None else bool(d["label_t15"]),
    )


# ------------------------------------------------------------- predictions


@dataclass(frozen=True)
class Prediction:
    """Risk score plus thresholded label for one device at one tick."""

    ts: float
    device_id: str
    score: float
    label_pred: int
    model_version: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")
        if self.label_pred not in (0, 1):
            raise ValueError(f"label_pred must be 0 or 1, got {self.label_pred}")
        if self.model_version < 1:
            raise ValueError(f"model_version must be >= 1, got {self.model_version}")

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "ts": self.ts,
            "device_id": self.device_id,
            "score": self.score,
            "label_pred": self.label_pred,
            "model_version": self.model_version,
        }


def prediction_from_json_dict(d: dict[str, Any]) -> Prediction:
    return Prediction(
        ts=float(d["ts"]),
        device_id=str(d["device_id"]),
        score=float(d["score"]),
        label_pred=int(d["label_pred"]),
        model_version=int(d["model_version"]),
    )


# -------------------------------------------------------------- mitigation


@dataclass(frozen=True)
class MitigationCommand:
    """Operator action pushed back into the network."""

    device_id: str
    action: str
    issued_at: float

    def __post_init__(self) -> None:
        if self.action not in MITIGATION_ACTIONS:
            raise ValueError(
                f"action must be one of {MITIGATION_ACTIONS}, got {self.action!r}"
            )

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "device_id": self.device_id,
            "action": self.action,
            "issued_at": self.issued_at,
        }


def mitigation_from_json_dict(d: dict[str, Any]) -> MitigationCommand:
    return MitigationCommand(
        device_id=str(d["device_id"]),
        action=str(d["action"]),
        issued_at=float(d["issued_at"]),
    )


def normalize_action(action: str) -> str:
    """Map operator spellings like 'rate-limit' onto the canonical action set."""
    canon = action.strip().lower().replace("-", "_")
    if canon not in MITIGATION_ACTIONS:
        raise ValueError(f"unknown mitigation action {action!r}")
    return canon


# ------------------------------------------------------------ label config


@dataclass(frozen=True)
class LabelingConfig:
    """Forecast horizon and tick spacing, both in seconds."""

    horizon: float = 15.0
    dt_period: float = 5.0

    def __post_init__(self) -> None:
        if not self.horizon > 0:
            raise ValueError(f"horizon must be > 0, got {self.horizon}")
        if not self.dt_period > 0:
            raise ValueError(f"dt_period must be > 0, got {self.dt_period}")

    def to_json_dict(self) -> dict[str, Any]:
        return {"horizon": self.horizon, "dt_period": self.dt_period}


def labeling_config_from_json_dict(d: dict[str, Any]) -> LabelingConfig:
    return LabelingConfig(horizon=float(d["horizon"]), dt_period=float(d["dt_period"]))


# ---------------------------------------------------------------- counting


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        for name in ("tp", "fp", "fn", "tn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def to_json_dict(self) -> dict[str, Any]:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


def confusion_from_json_dict(d: dict[str, Any]) -> ConfusionCounts:
    return ConfusionCounts(tp=int(d["tp"]), fp=int(d["fp"]), fn=int(d["fn"]), tn=int(d["tn"]))
