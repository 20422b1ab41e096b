"""Temporal labeling: mark rows whose near future contains an attack.

label_t15(i) = 1 iff some row j has ts_j in (ts_i, ts_i + horizon] with
attack_j true.  The window is open below (a row never labels itself, and
neither does any other row at the exact same timestamp) and closed above.

Two independent routes compute the same predicate: the production path uses
binary search plus a next-attack index, the oracle spells out the O(n^2)
double comparison.  They must agree exactly on every input.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import (
    LabelingConfig,
    NettwinError,
    snapshot_from_json_dict,
    validate_snapshot,
)
from .profiles import FALSY_FLAGS, TRUTHY_FLAGS, TS_FORMATS, SchemaProfile, get_profile


class MissingColumn(NettwinError):
    """A column the profile requires is absent from the header."""


class UnparsableRow(NettwinError):
    """A row's timestamp or attack flag could not be parsed."""


class EmptyFile(NettwinError):
    """The CSV has no header or no data rows."""


class Unsorted(NettwinError):
    """Rows are not sorted by ts."""


@dataclass
class LabeledTable:
    """Timestamp-sorted flow rows plus (eventually) their temporal labels.

    Cells are kept as the raw CSV text so writing the table back echoes the
    input byte for byte; ts and attack are parsed up front since every
    operation needs them.
    """

    profile: str
    columns: tuple[str, ...]
    cells: list[tuple[str, ...]]
    ts: np.ndarray
    attack: np.ndarray
    label_t15: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.cells)

    def column_values(self, name: str) -> list[str]:
        idx = self.columns.index(name)
        return [row[idx] for row in self.cells]


# ------------------------------------------------------------ the predicate


def temporal_labels(ts: np.ndarray, attack: np.ndarray, horizon: float) -> np.ndarray:
    """Label a sorted timeline: 1 iff an attack row falls in (ts_i, ts_i + horizon].

    Binary search finds the window bounds; a next-attack index answers "is
    there any attack at position >= lo" in O(1).
    """
    ts = np.asarray(ts, dtype=np.float64)
    attack = np.asarray(attack, dtype=bool)
    n = ts.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int8)
    if np.any(np.diff(ts) < 0):
        raise Unsorted("rows must be sorted by ts before labeling")

    positions = np.arange(n)
    candidates = np.where(attack, positions, n)
    next_attack = np.empty(n + 1, dtype=np.int64)
    next_attack[n] = n
    next_attack[:n] = np.minimum.accumulate(candidates[::-1])[::-1]

    lo = np.searchsorted(ts, ts, side="right")
    hi = np.searchsorted(ts, ts + horizon, side="right") - 1
    return (next_attack[lo] <= hi).astype(np.int8)


def brute_force_labels_oracle(
    ts: np.ndarray, attack: np.ndarray, horizon: float
) -> np.ndarray:
    """The same predicate as a literal all-pairs comparison (reference only)."""
    ts = np.asarray(ts, dtype=np.float64)
    attack = np.asarray(attack, dtype=bool)
    n = ts.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int8)
    if np.any(np.diff(ts) < 0):
        raise Unsorted("rows must be sorted by ts before labeling")
    in_window = (ts[None, :] > ts[:, None]) & (ts[None, :] <= ts[:, None] + horizon)
    return (in_window & attack[None, :]).any(axis=1).astype(np.int8)


def assign_temporal_labels(table: LabeledTable, cfg: LabelingConfig) -> LabeledTable:
    """Label the whole table as one timeline."""
    labels = temporal_labels(table.ts, table.attack, cfg.horizon)
    return replace(table, label_t15=labels)


def assign_temporal_labels_grouped(
    table: LabeledTable, cfg: LabelingConfig, group_column: str
) -> LabeledTable:
    """Label each group's rows as its own timeline (e.g. one device each).

    A device's forecast should only look at that device's future, so tables
    that interleave several devices are labeled per group.
    """
    if group_column not in table.columns:
        raise MissingColumn(f"group column {group_column!r} not in table")
    keys = table.column_values(group_column)
    labels = np.zeros(len(table), dtype=np.int8)
    by_key: dict[str, list[int]] = {}
    for i, key in enumerate(keys):
        by_key.setdefault(key, []).append(i)
    for idx_list in by_key.values():
        idx = np.array(idx_list, dtype=np.int64)
        labels[idx] = temporal_labels(table.ts[idx], table.attack[idx], cfg.horizon)
    return replace(table, label_t15=labels)


def label_table(table: LabeledTable, cfg: LabelingConfig) -> LabeledTable:
    """Label a table the way its profile expects (grouped or whole-file)."""
    profile = get_profile(table.profile)
    if profile.group_column and profile.group_column in table.columns:
        return assign_temporal_labels_grouped(table, cfg, profile.group_column)
    return assign_temporal_labels(table, cfg)


# ----------------------------------------------------------------- parsing


def _parse_ts(cell: str) -> float:
    text = cell.strip()
    try:
        return float(text)
    except ValueError:
        pass
    for fmt in TS_FORMATS:
        try:
            parsed = _dt.datetime.strptime(text, fmt)
        except ValueError:
            continue
        return parsed.replace(tzinfo=_dt.timezone.utc).timestamp()
    raise ValueError(f"cannot parse timestamp {cell!r}")


def _parse_attack(cell: str, profile: SchemaProfile) -> bool:
    text = cell.strip().lower()
    if profile.benign_values is not None:
        return text not in profile.benign_values
    if text in TRUTHY_FLAGS:
        return True
    if text in FALSY_FLAGS:
        return False
    try:
        return float(text) != 0.0
    except ValueError:
        raise ValueError(f"cannot parse attack flag {cell!r}") from None


def load_flow_csv(path: str | Path, profile_name: str) -> LabeledTable:
    """Read a flow CSV, derive the attack flag, and stably sort by ts."""
    profile = get_profile(profile_name)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(f"{path}: no header row") from None
        rows = [tuple(r) for r in reader if r]
    if not rows:
        raise EmptyFile(f"{path}: no data rows")

    columns = tuple(h.strip() for h in header)
    for name in profile.required_columns:
        if name not in columns:
            raise MissingColumn(f"{path}: required column {name!r} missing")

    ts_idx = columns.index(profile.ts_column)
    label_idx = columns.index(profile.label_column)
    ts = np.empty(len(rows), dtype=np.float64)
    attack = np.empty(len(rows), dtype=bool)
    for i, row in enumerate(rows):
        line_no = i + 2  # header is line 1
        if len(row) != len(columns):
            raise UnparsableRow(f"{path}:{line_no}: expected {len(columns)} cells, got {len(row)}")
        try:
            ts[i] = _parse_ts(row[ts_idx])
            attack[i] = _parse_attack(row[label_idx], profile)
        except ValueError as exc:
            raise UnparsableRow(f"{path}:{line_no}: {exc}") from None

    order = np.argsort(ts, kind="stable")
    cells = [rows[i] for i in order]
    return LabeledTable(
        profile=profile.name,
        columns=columns,
        cells=cells,
        ts=ts[order],
        attack=attack[order],
    )


def write_labeled_csv(table: LabeledTable, path: str | Path) -> None:
    """Write the table back out: original columns echoed plus label_t15."""
    if table.label_t15 is None:
        raise NettwinError("table has no labels yet; run assign_temporal_labels first")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(table.columns) + ["label_t15"])
        for row, label in zip(table.cells, table.label_t15):
            writer.writerow(list(row) + [int(label)])


# ------------------------------------------------- simulator output as input


def _format_cell(value: object) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def table_from_snapshots(
    snapshots_path: str | Path, truth_path: str | Path
) -> LabeledTable:
    """Join simulator snapshots with ground-truth attack intervals.

    Produces a simulator-profile table: snapshot columns plus an attack flag
    saying whether the device's interval schedule covers that tick.
    """
    with open(truth_path, encoding="utf-8") as fh:
        truth: dict[str, list[list[float]]] = json.load(fh)

    columns = (
        "ts",
        "device_id",
        "flow_count",
        "total_packets",
        "total_bytes",
        "avg_packet_size",
        "link_count",
        "attack",
    )
    cells: list[tuple[str, ...]] = []
    ts_list: list[float] = []
    attack_list: list[bool] = []
    with open(snapshots_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            snap = validate_snapshot(snapshot_from_json_dict(json.loads(line)))
            intervals = truth.get(snap.device_id, [])
            attacked = any(start <= snap.ts < end for start, end in intervals)
            cells.append(
                tuple(
                    _format_cell(v)
                    for v in (
                        snap.ts,
                        snap.device_id,
                        snap.flow_count,
                        snap.total_packets,
                        snap.total_bytes,
                        snap.avg_packet_size,
                        snap.link_count,
                        attacked,
                    )
                )
            )
            ts_list.append(snap.ts)
            attack_list.append(attacked)
    if not cells:
        raise EmptyFile(f"{snapshots_path}: no snapshots")

    ts = np.array(ts_list, dtype=np.float64)
    attack = np.array(attack_list, dtype=bool)
    order = np.argsort(ts, kind="stable")
    return LabeledTable(
        profile="simulator",
        columns=columns,
        cells=[cells[i] for i in order],
        ts=ts[order],
        attack=attack[order],
    )
