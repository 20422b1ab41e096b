"""Feature preparation: sanitize columns, encode strings, scale, split, balance.

The fit side runs over a labeled table and produces a FeatureMatrix plus a
persisted artifact {profile, kept_columns, encoding_maps, scaler}.  The apply
side consumes that artifact verbatim, either on whole tables (replay,
evaluation) or on single snapshot-shaped mappings (live inference).

Column policy at fit time, in order: configured identifiers are dropped;
columns with no finite values at all are dropped; +/-inf is replaced by the
column's finite max/min; rows still containing NaN are dropped (and counted);
zero-variance columns are dropped.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import NettwinError
from .labeling import LabeledTable, MissingColumn
from .profiles import get_profile


class SchemaMismatch(NettwinError):
    """Input at apply time does not match the fitted artifact."""


class AllRowsDropped(NettwinError):
    """Sanitization removed every row."""


class SingleClass(NettwinError):
    """An operation that needs both classes saw only one."""


# ------------------------------------------------------------------- types


@dataclass
class RawMatrix:
    """Columns after sanitization; string-valued ones still await encoding."""

    names: tuple[str, ...]
    columns: list[np.ndarray]
    y: np.ndarray
    dropped_rows: int = 0


@dataclass
class FeatureMatrix:
    names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    dropped_rows: int = 0

    def __post_init__(self) -> None:
        if self.X.shape[0] != self.y.shape[0]:
            raise SchemaMismatch(
                f"X has {self.X.shape[0]} rows but y has {self.y.shape[0]}"
            )


@dataclass
class ScalerParams:
    """Per-column affine transform plus the finite range seen at fit time.

    kind 'standard' uses (center=mean, scale=population std); 'minmax' uses
    (center=min, scale=max-min).  Constant columns pass through untouched.
    """

    kind: str
    names: tuple[str, ...]
    center: np.ndarray
    scale: np.ndarray
    constant: np.ndarray
    finite_min: np.ndarray
    finite_max: np.ndarray

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "names": list(self.names),
            "center": self.center.tolist(),
            "scale": self.scale.tolist(),
            "constant": self.constant.tolist(),
            "finite_min": self.finite_min.tolist(),
            "finite_max": self.finite_max.tolist(),
        }


def scaler_from_json_dict(d: dict) -> ScalerParams:
    return ScalerParams(
        kind=str(d["kind"]),
        names=tuple(d["names"]),
        center=np.array(d["center"], dtype=np.float64),
        scale=np.array(d["scale"], dtype=np.float64),
        constant=np.array(d["constant"], dtype=bool),
        finite_min=np.array(d["finite_min"], dtype=np.float64),
        finite_max=np.array(d["finite_max"], dtype=np.float64),
    )


@dataclass
class PreprocessArtifact:
    profile: str
    kept_columns: tuple[str, ...]
    encoding_maps: dict[str, dict[str, int]]
    scaler: ScalerParams | None = None

    def to_json_dict(self) -> dict:
        return {
            "profile": self.profile,
            "kept_columns": list(self.kept_columns),
            "encoding_maps": self.encoding_maps,
            "scaler": None if self.scaler is None else self.scaler.to_json_dict(),
        }


def artifact_from_json_dict(d: dict) -> PreprocessArtifact:
    return PreprocessArtifact(
        profile=str(d["profile"]),
        kept_columns=tuple(d["kept_columns"]),
        encoding_maps={
            col: {str(k): int(v) for k, v in mapping.items()}
            for col, mapping in d["encoding_maps"].items()
        },
        scaler=None if d.get("scaler") is None else scaler_from_json_dict(d["scaler"]),
    )


def load_artifact(path: str | Path) -> PreprocessArtifact:
    with open(path, encoding="utf-8") as fh:
        return artifact_from_json_dict(json.load(fh))


# ------------------------------------------------------------ sanitization


def _try_parse_numeric(cells: list[str]) -> np.ndarray | None:
    """Parse a text column as float64, or None if any non-empty cell refuses."""
    out = np.empty(len(cells), dtype=np.float64)
    for i, cell in enumerate(cells):
        text = cell.strip()
        if not text:
            out[i] = np.nan
            continue
        try:
            out[i] = float(text)
        except ValueError:
            return None
    return out


def sanitize_and_select(
    table: LabeledTable,
    profile_name: str | None = None,
    feature_columns: tuple[str, ...] | None = None,
) -> RawMatrix:
    """Pick and clean feature columns; rows with NaN left over are dropped."""
    if table.label_t15 is None:
        raise NettwinError("table must be labeled before feature extraction")
    profile = get_profile(profile_name or table.profile)

    if feature_columns is None:
        feature_columns = profile.feature_columns
    if feature_columns is None:
        skip = {profile.ts_column, profile.label_column, "label_t15"}
        feature_columns = tuple(c for c in table.columns if c not in skip)
    for name in feature_columns:
        if name not in table.columns:
            raise MissingColumn(f"feature column {name!r} not in table")
    feature_columns = tuple(
        c for c in feature_columns if c not in profile.identifier_columns
    )

    n = len(table)
    names: list[str] = []
    columns: list[np.ndarray] = []
    for name in feature_columns:
        cells = table.column_values(name)
        numeric = _try_parse_numeric(cells)
        if numeric is None:
            columns.append(np.array([c.strip() for c in cells], dtype=object))
            names.append(name)
            continue
        finite = numeric[np.isfinite(numeric)]
        if finite.size == 0:
            continue  # nothing usable in this column
        numeric = np.where(numeric == np.inf, finite.max(), numeric)
        numeric = np.where(numeric == -np.inf, finite.min(), numeric)
        columns.append(numeric)
        names.append(name)

    keep_row = np.ones(n, dtype=bool)
    for col in columns:
        if col.dtype == np.float64:
            keep_row &= ~np.isnan(col)
    dropped = int(n - keep_row.sum())
    if keep_row.sum() == 0:
        raise AllRowsDropped(f"sanitization dropped all {n} rows")

    y = np.asarray(table.label_t15, dtype=np.int8)[keep_row]
    kept_names: list[str] = []
    kept_cols: list[np.ndarray] = []
    for name, col in zip(names, columns):
        col = col[keep_row]
        distinct = len(set(col.tolist())) if col.dtype == object else np.unique(col).size
        if distinct <= 1:
            continue  # zero variance carries no signal
        kept_names.append(name)
        kept_cols.append(col)

    return RawMatrix(names=tuple(kept_names), columns=kept_cols, y=y, dropped_rows=dropped)


# ---------------------------------------------------------------- encoding


def encode_categoricals(
    raw: RawMatrix, maps: dict[str, dict[str, int]] | None = None
) -> tuple[FeatureMatrix, dict[str, dict[str, int]]]:
    """Map string columns onto integer codes (sorted lexicographically).

    With `maps` given, applies an existing encoding; unseen values become -1.
    """
    fitted: dict[str, dict[str, int]] = {}
    out_cols: list[np.ndarray] = []
    for name, col in zip(raw.names, raw.columns):
        if col.dtype != object:
            out_cols.append(col.astype(np.float64))
            continue
        if maps is None:
            mapping = {v: i for i, v in enumerate(sorted(set(col.tolist())))}
        else:
            if name not in maps:
                raise SchemaMismatch(f"no encoding map for column {name!r}")
            mapping = maps[name]
        fitted[name] = mapping
        out_cols.append(
            np.array([mapping.get(v, -1) for v in col.tolist()], dtype=np.float64)
        )
    X = np.column_stack(out_cols) if out_cols else np.empty((len(raw.y), 0))
    matrix = FeatureMatrix(
        names=raw.names, X=X, y=raw.y, dropped_rows=raw.dropped_rows
    )
    return matrix, (maps if maps is not None else fitted)


def decode_categorical(maps: dict[str, dict[str, int]], column: str, code: int) -> str:
    for value, c in maps[column].items():
        if c == code:
            return value
    raise KeyError(f"code {code} not present in encoding for {column!r}")


# ----------------------------------------------------------------- scaling


def fit_scaler(matrix: FeatureMatrix, kind: str = "standard") -> ScalerParams:
    if kind not in ("standard", "minmax"):
        raise ValueError(f"scaler kind must be standard or minmax, got {kind!r}")
    X = matrix.X
    col_min = X.min(axis=0) if X.size else np.zeros(X.shape[1])
    col_max = X.max(axis=0) if X.size else np.zeros(X.shape[1])
    if kind == "standard":
        center = X.mean(axis=0) if X.size else np.zeros(X.shape[1])
        scale = X.std(axis=0) if X.size else np.zeros(X.shape[1])  # population std
    else:
        center = col_min
        scale = col_max - col_min
    constant = scale == 0.0
    safe_scale = np.where(constant, 1.0, scale)
    return ScalerParams(
        kind=kind,
        names=matrix.names,
        center=center,
        scale=safe_scale,
        constant=constant,
        finite_min=col_min,
        finite_max=col_max,
    )


def apply_scaler(X: np.ndarray, params: ScalerParams) -> np.ndarray:
    if X.shape[1] != params.center.shape[0]:
        raise SchemaMismatch(
            f"matrix has {X.shape[1]} columns, scaler expects {params.center.shape[0]}"
        )
    scaled = (X - params.center) / params.scale
    return np.where(params.constant, X, scaled)


# ------------------------------------------------------- split and balance


def largest_remainder_counts(class_counts: list[int], fraction: float) -> list[int]:
    """Counts per class summing to round(total * fraction), floor-then-top-up."""
    targets = [c * fraction for c in class_counts]
    base = [math.floor(t) for t in targets]
    leftover = int(round(sum(targets))) - sum(base)
    order = sorted(range(len(targets)), key=lambda i: (-(targets[i] - base[i]), i))
    for i in order[:leftover]:
        base[i] += 1
    return base


def stratified_split(
    matrix: FeatureMatrix, test_fraction: float, seed: int
) -> tuple[FeatureMatrix, FeatureMatrix]:
    """Class-stratified random split; same seed gives identical index sets."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    classes = np.unique(matrix.y)
    counts = [int((matrix.y == c).sum()) for c in classes]
    test_counts = largest_remainder_counts(counts, test_fraction)

    test_idx: list[np.ndarray] = []
    for c, q in zip(classes, test_counts):
        members = np.flatnonzero(matrix.y == c)
        members = members[rng.permutation(members.size)]
        test_idx.append(members[:q])
    test = np.sort(np.concatenate(test_idx)) if test_idx else np.empty(0, dtype=int)
    mask = np.zeros(matrix.y.shape[0], dtype=bool)
    mask[test] = True

    def subset(keep: np.ndarray) -> FeatureMatrix:
        return FeatureMatrix(names=matrix.names, X=matrix.X[keep], y=matrix.y[keep])

    return subset(~mask), subset(mask)


def random_undersample(matrix: FeatureMatrix, seed: int) -> FeatureMatrix:
    """Sample the majority class down to the minority count, without replacement."""
    classes, counts = np.unique(matrix.y, return_counts=True)
    if classes.size < 2 or counts.min() == counts.max():
        return matrix
    minority = classes[np.argmin(counts)]
    target = int(counts.min())
    rng = np.random.default_rng(seed)
    keep: list[np.ndarray] = []
    for c in classes:
        members = np.flatnonzero(matrix.y == c)
        if c == minority:
            keep.append(members)
        else:
            keep.append(rng.choice(members, size=target, replace=False))
    idx = np.sort(np.concatenate(keep))
    return FeatureMatrix(names=matrix.names, X=matrix.X[idx], y=matrix.y[idx])


# --------------------------------------------------------------- pipelines


def prepare_features(
    table: LabeledTable,
    profile_name: str | None = None,
    feature_columns: tuple[str, ...] | None = None,
) -> tuple[FeatureMatrix, PreprocessArtifact]:
    """Fit-side pipeline: sanitize, encode, and record what was done."""
    raw = sanitize_and_select(table, profile_name, feature_columns)
    matrix, maps = encode_categoricals(raw)
    artifact = PreprocessArtifact(
        profile=profile_name or table.profile,
        kept_columns=matrix.names,
        encoding_maps=maps,
        scaler=None,
    )
    return matrix, artifact


def _clamp_non_finite(X: np.ndarray, scaler: ScalerParams) -> np.ndarray:
    X = np.where(X == np.inf, scaler.finite_max, X)
    X = np.where(X == -np.inf, scaler.finite_min, X)
    return X


def transform_matrix(matrix: FeatureMatrix, scaler: ScalerParams) -> FeatureMatrix:
    """Clamp non-finite cells and scale an already-encoded matrix."""
    if tuple(matrix.names) != tuple(scaler.names):
        raise SchemaMismatch(
            f"matrix columns {matrix.names} do not match scaler {scaler.names}"
        )
    X = _clamp_non_finite(matrix.X, scaler)
    return FeatureMatrix(
        names=matrix.names,
        X=apply_scaler(X, scaler),
        y=matrix.y,
        dropped_rows=matrix.dropped_rows,
    )


def apply_artifact_to_table(
    artifact: PreprocessArtifact, table: LabeledTable
) -> FeatureMatrix:
    """Apply a fitted artifact to a fresh labeled table (replay, evaluation)."""
    if table.label_t15 is None:
        raise NettwinError("table must be labeled before feature extraction")
    n = len(table)
    cols: list[np.ndarray] = []
    for name in artifact.kept_columns:
        if name not in table.columns:
            raise SchemaMismatch(f"column {name!r} missing from table")
        cells = table.column_values(name)
        if name in artifact.encoding_maps:
            mapping = artifact.encoding_maps[name]
            cols.append(
                np.array(
                    [mapping.get(c.strip(), -1) for c in cells], dtype=np.float64
                )
            )
        else:
            numeric = _try_parse_numeric(cells)
            if numeric is None:
                raise SchemaMismatch(f"column {name!r} is not numeric")
            cols.append(numeric)
    X = np.column_stack(cols) if cols else np.empty((n, 0))
    keep = ~np.isnan(X).any(axis=1)
    if keep.sum() == 0:
        raise AllRowsDropped("all rows dropped while applying artifact")
    X = X[keep]
    y = np.asarray(table.label_t15, dtype=np.int8)[keep]
    if artifact.scaler is not None:
        X = _clamp_non_finite(X, artifact.scaler)
        X = apply_scaler(X, artifact.scaler)
    return FeatureMatrix(
        names=artifact.kept_columns, X=X, y=y, dropped_rows=int(n - keep.sum())
    )


def vector_from_mapping(
    artifact: PreprocessArtifact, mapping: dict[str, object]
) -> np.ndarray:
    """Build one scaled inference vector from a snapshot-shaped mapping."""
    values = np.empty(len(artifact.kept_columns), dtype=np.float64)
    for i, name in enumerate(artifact.kept_columns):
        if name not in mapping:
            raise SchemaMismatch(f"field {name!r} missing from input")
        value = mapping[name]
        if name in artifact.encoding_maps:
            values[i] = artifact.encoding_maps[name].get(str(value).strip(), -1)
            continue
        try:
            values[i] = float(value)  # type: ignore[arg-type]
        except (TypeError, ValueError):
            raise SchemaMismatch(f"field {name!r} is not numeric: {value!r}") from None
    if artifact.scaler is None:
        if np.isnan(values).any():
            raise SchemaMismatch("input contains NaN")
        return values
    row = _clamp_non_finite(values[None, :], artifact.scaler)
    if np.isnan(row).any():
        raise SchemaMismatch("input contains NaN")
    return apply_scaler(row, artifact.scaler)[0]


# -------------------------------------------------------------- matrix I/O


def write_matrix_csv(matrix: FeatureMatrix, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(matrix.names) + ["label_t15"])
        for row, label in zip(matrix.X, matrix.y):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


def load_matrix_csv(path: str | Path) -> FeatureMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise NettwinError(f"{path}: empty matrix file") from None
        rows = [r for r in reader if r]
    if not rows:
        raise NettwinError(f"{path}: matrix has no rows")
    if header[-1] != "label_t15":
        raise SchemaMismatch(f"{path}: last column must be label_t15")
    names = tuple(header[:-1])
    X = np.array([[float(v) for v in r[:-1]] for r in rows], dtype=np.float64)
    y = np.array([int(r[-1]) for r in rows], dtype=np.int8)
    return FeatureMatrix(names=names, X=X, y=y)
