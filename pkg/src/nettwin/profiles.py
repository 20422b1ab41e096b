"""Schema profiles: how each supported flow-table layout maps onto the pipeline.

A profile names the timestamp and label columns, which columns are identifiers
(dropped before modeling), and optionally a fixed feature list.  Tables whose
rows interleave several devices also name a grouping column so temporal labels
are assigned within each device's own timeline.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import SNAPSHOT_FIELDS

# Default feature list for the enterprise profile.  Eighteen columns total:
# fourteen flow statistics plus the retained address/port columns, which get
# numeric-encoded downstream.
ENTERPRISE_DEFAULT_FEATURES = (
    "Source IP",
    "Destination IP",
    "Source Port",
    "Destination Port",
    "Flow Duration",
    "Total Fwd Packets",
    "Total Backward Packets",
    "Flow Bytes/s",
    "Flow Packets/s",
    "Flow IAT Mean",
    "Flow IAT Std",
    "Fwd IAT Mean",
    "Bwd IAT Mean",
    "Packet Length Mean",
    "Packet Length Std",
    "Packet Length Variance",
    "Average Packet Size",
    "Min Packet Length",
)

TRUTHY_FLAGS = frozenset({"1", "true", "t", "yes"})
FALSY_FLAGS = frozenset({"0", "false", "f", "no"})

# Accepted wall-clock layouts for dataset timestamp columns; numeric seconds
# always work and are tried first.
TS_FORMATS = (
    "%d/%m/%Y %H:%M:%S",
    "%d/%m/%Y %H:%M",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M:%S",
)


@dataclass(frozen=True)
class SchemaProfile:
    """Column mapping for one supported CSV layout."""

    name: str
    ts_column: str
    label_column: str
    # Values (lowercased) meaning "no attack".  None means the label cell is a
    # boolean/numeric flag instead of a class name.
    benign_values: frozenset[str] | None
    required_columns: tuple[str, ...]
    identifier_columns: tuple[str, ...]
    # None means "every column except ts and label".
    feature_columns: tuple[str, ...] | None
    group_column: str | None = None


SIMULATOR = SchemaProfile(
    name="simulator",
    ts_column="ts",
    label_column="attack",
    benign_values=None,
    required_columns=SNAPSHOT_FIELDS + ("attack",),
    identifier_columns=("device_id",),
    feature_columns=(
        "flow_count",
        "total_packets",
        "total_bytes",
        "avg_packet_size",
        "link_count",
    ),
    group_column="device_id",
)

IIOT_APT = SchemaProfile(
    name="iiot_apt",
    ts_column="ts",
    label_column="attack",
    benign_values=None,
    required_columns=("ts", "attack"),
    identifier_columns=("src_ip", "dst_ip"),
    feature_columns=None,
)

ENTERPRISE_FLOW = SchemaProfile(
    name="enterprise_flow",
    ts_column="Timestamp",
    label_column="Label",
    benign_values=frozenset({"benign"}),
    required_columns=("Timestamp", "Label"),
    identifier_columns=(),
    feature_columns=ENTERPRISE_DEFAULT_FEATURES,
)

PROFILES = {p.name: p for p in (SIMULATOR, IIOT_APT, ENTERPRISE_FLOW)}


def get_profile(name: str) -> SchemaProfile:
    try:
        return PROFILES[name]
    except KeyError:
        raise KeyError(
            f"unknown profile {name!r}; expected one of {sorted(PROFILES)}"
        ) from None
