import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nettwin.core import LabelingConfig
from nettwin.labeling import (
    EmptyFile,
    MissingColumn,
    UnparsableRow,
    Unsorted,
    assign_temporal_labels,
    assign_temporal_labels_grouped,
    brute_force_labels_oracle,
    label_table,
    load_flow_csv,
    table_from_snapshots,
    temporal_labels,
    write_labeled_csv,
)

CFG = LabelingConfig(horizon=15.0, dt_period=5.0)


def labels(ts, attack, horizon=15.0):
    return temporal_labels(np.array(ts, float), np.array(attack, bool), horizon).tolist()


def oracle(ts, attack, horizon=15.0):
    return brute_force_labels_oracle(
        np.array(ts, float), np.array(attack, bool), horizon
    ).tolist()


class TestFrozenCases:
    """Hand-checked expected labels; the oracle must agree on each."""

    def test_four_row_case(self):
        ts, attack = [0, 5, 12, 30], [False, False, True, False]
        assert labels(ts, attack) == [1, 1, 0, 0]
        assert oracle(ts, attack) == [1, 1, 0, 0]

    def test_boundary_exactly_horizon_ahead_counts(self):
        ts, attack = [0, 15], [False, True]
        assert labels(ts, attack) == [1, 0]
        assert oracle(ts, attack) == [1, 0]

    def test_same_timestamp_attack_does_not_count(self):
        # The window is open below: delta zero is outside it.
        ts, attack = [10, 10, 20], [False, True, False]
        assert labels(ts, attack) == [0, 0, 0]
        assert oracle(ts, attack) == [0, 0, 0]

    def test_row_never_labels_itself(self):
        ts, attack = [0, 30], [True, True]
        assert labels(ts, attack) == [0, 0]

    def test_all_attack_run(self):
        ts, attack = [0, 5, 10], [True, True, True]
        assert labels(ts, attack) == [1, 1, 0]

    def test_empty_table(self):
        assert labels([], []) == []
        assert oracle([], []) == []

    def test_truncated_trailing_window_still_computed(self):
        # Windows past the end of the data simply see fewer rows.
        ts, attack = [0, 5], [False, False]
        assert labels(ts, attack) == [0, 0]

    def test_unsorted_rejected(self):
        with pytest.raises(Unsorted):
            labels([5, 0], [False, True])
        with pytest.raises(Unsorted):
            oracle([5, 0], [False, True])


class TestProperties:
    @given(
        st.lists(
            st.tuples(st.floats(0, 300), st.booleans()), min_size=0, max_size=60
        ),
        st.floats(0.5, 40),
    )
    @settings(max_examples=120, deadline=None)
    def test_oracle_equivalence(self, rows, horizon):
        rows.sort(key=lambda r: r[0])
        ts = [r[0] for r in rows]
        attack = [r[1] for r in rows]
        assert labels(ts, attack, horizon) == oracle(ts, attack, horizon)

    @given(
        st.lists(st.tuples(st.floats(0, 200), st.booleans()), min_size=1, max_size=40),
        st.floats(1, 20),
        st.floats(0, 20),
    )
    @settings(max_examples=80, deadline=None)
    def test_horizon_monotone(self, rows, h1, extra):
        rows.sort(key=lambda r: r[0])
        ts = [r[0] for r in rows]
        attack = [r[1] for r in rows]
        narrow = labels(ts, attack, h1)
        wide = labels(ts, attack, h1 + extra)
        assert all(a <= b for a, b in zip(narrow, wide))

    def test_last_row_label_is_zero(self):
        rng = np.random.default_rng(4)
        for _ in range(25):
            n = int(rng.integers(1, 50))
            ts = np.sort(rng.uniform(0, 100, n))
            attack = rng.random(n) < 0.4
            out = temporal_labels(ts, attack, 15.0)
            # Rows holding the max timestamp can only see same-ts rows, which
            # never count.
            assert out[ts == ts.max()].sum() == 0


class TestCsvPipeline:
    HEADER = "ts,device_id,flow_count,total_packets,total_bytes,avg_packet_size,link_count,attack\n"

    def write_csv(self, path, rows, header=None):
        path.write_text((header or self.HEADER) + "".join(rows))

    def test_load_label_write_roundtrip(self, tmp_path):
        src = tmp_path / "in.csv"
        rows = [
            "0,of:01,10,500,250000,500.0,2,0\n",
            "5,of:01,11,520,260000,500.0,2,0\n",
            "12,of:01,90,4000,256000,64.0,2,1\n",
            "30,of:01,10,500,250000,500.0,2,0\n",
        ]
        self.write_csv(src, rows)
        table = load_flow_csv(src, "simulator")
        table = label_table(table, CFG)
        assert table.label_t15.tolist() == [1, 1, 0, 0]

        out = tmp_path / "out.csv"
        write_labeled_csv(table, out)
        lines = out.read_text().splitlines()
        assert lines[0] == self.HEADER.strip() + ",label_t15"
        assert lines[1] == "0,of:01,10,500,250000,500.0,2,0,1"
        assert lines[4] == "30,of:01,10,500,250000,500.0,2,0,0"

    def test_stable_sort_preserves_tied_order(self, tmp_path):
        src = tmp_path / "in.csv"
        rows = [
            "5,of:02,10,500,250000,500.0,2,0\n",
            "0,of:01,10,500,250000,500.0,2,0\n",
            "5,of:01,11,520,260000,500.0,2,0\n",
        ]
        self.write_csv(src, rows)
        table = load_flow_csv(src, "simulator")
        ids = table.column_values("device_id")
        assert table.ts.tolist() == [0.0, 5.0, 5.0]
        assert ids == ["of:01", "of:02", "of:01"]

    def test_missing_column(self, tmp_path):
        src = tmp_path / "in.csv"
        src.write_text("ts,flow_count\n0,1\n")
        with pytest.raises(MissingColumn):
            load_flow_csv(src, "simulator")

    def test_empty_file(self, tmp_path):
        src = tmp_path / "in.csv"
        src.write_text("")
        with pytest.raises(EmptyFile):
            load_flow_csv(src, "simulator")
        src.write_text(self.HEADER)
        with pytest.raises(EmptyFile):
            load_flow_csv(src, "simulator")

    def test_unparsable_row(self, tmp_path):
        src = tmp_path / "in.csv"
        self.write_csv(src, ["abc,of:01,1,1,1,1.0,1,0\n"])
        with pytest.raises(UnparsableRow):
            load_flow_csv(src, "simulator")

    def test_enterprise_label_parsing(self, tmp_path):
        src = tmp_path / "flows.csv"
        src.write_text(
            "Timestamp,Label\n"
            "10,BENIGN\n"
            "12,DoS Hulk\n"
            "40,BENIGN\n"
        )
        table = load_flow_csv(src, "enterprise_flow")
        assert table.attack.tolist() == [False, True, False]
        labeled = label_table(table, CFG)
        assert labeled.label_t15.tolist() == [1, 0, 0]


class TestGroupedLabeling:
    HEADER = "ts,device_id,flow_count,total_packets,total_bytes,avg_packet_size,link_count,attack\n"

    def test_two_devices_do_not_cross_label(self, tmp_path):
        src = tmp_path / "in.csv"
        rows = []
        for t in (0, 5, 10, 15, 20):
            attacked = 1 if (t in (10, 15)) else 0
            rows.append(f"{t},of:0a,10,500,250000,500.0,2,{attacked}\n")
            rows.append(f"{t},of:0b,10,500,250000,500.0,2,0\n")
        src.write_text(self.HEADER + "".join(rows))
        table = load_flow_csv(src, "simulator")
        grouped = assign_temporal_labels_grouped(table, CFG, "device_id")

        got = {}
        ids = grouped.column_values("device_id")
        for dev, t, lab in zip(ids, grouped.ts, grouped.label_t15):
            got.setdefault(dev, []).append((t, int(lab)))
        assert got["of:0a"] == [(0, 1), (5, 1), (10, 1), (15, 0), (20, 0)]
        assert got["of:0b"] == [(0, 0), (5, 0), (10, 0), (15, 0), (20, 0)]

        # Whole-table labeling would have leaked of:0a's future onto of:0b.
        ungrouped = assign_temporal_labels(table, CFG)
        leaked = [
            int(lab)
            for dev, lab in zip(ids, ungrouped.label_t15)
            if dev == "of:0b"
        ]
        assert sum(leaked) > 0

    def test_label_table_dispatches_on_profile(self, tmp_path):
        src = tmp_path / "in.csv"
        rows = [
            "0,of:0a,10,500,250000,500.0,2,0\n",
            "0,of:0b,10,500,250000,500.0,2,0\n",
            "5,of:0a,90,900,57600,64.0,2,1\n",
            "5,of:0b,10,500,250000,500.0,2,0\n",
        ]
        src.write_text(self.HEADER + "".join(rows))
        out = label_table(load_flow_csv(src, "simulator"), CFG)
        by_dev = {}
        for dev, lab in zip(out.column_values("device_id"), out.label_t15):
            by_dev.setdefault(dev, []).append(int(lab))
        assert by_dev["of:0a"] == [1, 0]
        assert by_dev["of:0b"] == [0, 0]


class TestSnapshotJoin:
    def test_attack_flag_from_intervals(self, tmp_path):
        snaps = tmp_path / "snapshots.ndjson"
        lines = []
        for t in (5.0, 10.0, 15.0, 20.0):
            for dev in ("of:01", "of:02"):
                lines.append(
                    json.dumps(
                        {
                            "ts": t,
                            "device_id": dev,
                            "flow_count": 10,
                            "total_packets": 500,
                            "total_bytes": 250000,
                            "avg_packet_size": 500.0,
                            "link_count": 1,
                        }
                    )
                )
        snaps.write_text("\n".join(lines) + "\n")
        truth = tmp_path / "truth.json"
        truth.write_text(json.dumps({"of:02": [[10.0, 20.0]]}))

        table = table_from_snapshots(snaps, truth)
        flagged = [
            (dev, t)
            for dev, t, a in zip(
                table.column_values("device_id"), table.ts, table.attack
            )
            if a
        ]
        # Half-open interval: ts 10 and 15 are inside, 20 is not.
        assert flagged == [("of:02", 10.0), ("of:02", 15.0)]
