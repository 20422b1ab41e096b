"""Seeded stand-in for an emulated SDN testbed.

Builds a small switch/host topology, emits per-interval counter snapshots on a
fixed tick, injects scripted attack traffic, and accepts mitigation commands
whose effect shows up on the next tick.  Identical (spec, seed) pairs produce
byte-identical output streams.

Attack signatures are multiplicative in the configured baseline bands so they
stay separable from benign noise by construction:

  dos_burst     many flows, a packet flood of tiny frames
  scan          many single-packet probe flows, almost no bytes
  exfiltration  few flows, large frames, a byte flood

Mitigation semantics: traffic arriving at a device is subject to that
device's own policy -- drop zeroes it, each rate_limit halves it.  reroute
diverts the device's attack traffic to its lowest-id neighbor (one hop, so two
devices rerouting at each other cannot loop); the neighbor's own policy then
applies to what lands on it.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import DeviceSnapshot, MitigationCommand, NettwinError

ATTACK_KINDS = ("dos_burst", "scan", "exfiltration")
BAND_COUNTERS = ("flow_count", "total_packets", "total_bytes")

# Frame sizes used by the attack signatures, in bytes.
DOS_FRAME = 64
SCAN_FRAME = 60
EXFIL_FRAME = 1400


class EmptySpec(NettwinError):
    """The scenario spec describes no usable network."""


class UnknownDevice(NettwinError):
    """A scenario or command references a device not in the topology."""


class NoNeighbor(NettwinError):
    """reroute was requested on a device with degree 0."""


# ---------------------------------------------------------------- topology


@dataclass(frozen=True)
class TopologySpec:
    switches: int
    hosts: int
    wiring: str
    seed: int


@dataclass(frozen=True)
class Topology:
    devices: tuple[str, ...]
    links: tuple[tuple[str, str], ...]

    def neighbors(self, device_id: str) -> tuple[str, ...]:
        out = [b if a == device_id else a for a, b in self.links if device_id in (a, b)]
        return tuple(sorted(out))

    def degree(self, device_id: str) -> int:
        return len(self.neighbors(device_id))

    def to_json_dict(self) -> dict:
        return {
            "devices": list(self.devices),
            "links": [list(l) for l in self.links],
        }


def _switch_id(i: int) -> str:
    return f"of:{i + 1:016x}"


def _host_id(j: int) -> str:
    return f"host:{j + 1:04x}"


_CHORDS_RE = re.compile(r"^ring\+chords\((\d+)\)$")


def build_topology(spec: TopologySpec) -> Topology:
    """Wire up switches per the rule, then attach hosts with the seeded RNG."""
    if spec.switches < 0 or spec.hosts < 0:
        raise EmptySpec("switch and host counts must be non-negative")
    if spec.switches + spec.hosts == 0:
        raise EmptySpec("topology has no devices")
    if spec.hosts > 0 and spec.switches == 0:
        raise EmptySpec("hosts need at least one switch to attach to")

    switches = [_switch_id(i) for i in range(spec.switches)]
    hosts = [_host_id(j) for j in range(spec.hosts)]
    links: list[tuple[str, str]] = []

    def add(a: str, b: str) -> None:
        pair = (a, b) if a <= b else (b, a)
        if pair not in links:
            links.append(pair)

    chords = 0
    match = _CHORDS_RE.match(spec.wiring)
    if match:
        base = "ring"
        chords = int(match.group(1))
    else:
        base = spec.wiring

    if base == "line":
        for i in range(len(switches) - 1):
            add(switches[i], switches[i + 1])
    elif base == "ring":
        for i in range(len(switches) - 1):
            add(switches[i], switches[i + 1])
        if len(switches) >= 3:
            add(switches[-1], switches[0])
    elif base == "star":
        for s in switches[1:]:
            add(switches[0], s)
    else:
        raise EmptySpec(f"unknown wiring rule {spec.wiring!r}")

    rng = np.random.default_rng(spec.seed)
    if chords:
        candidates = [
            (switches[i], switches[j])
            for i in range(len(switches))
            for j in range(i + 1, len(switches))
            if (switches[i], switches[j]) not in links
            and (switches[j], switches[i]) not in links
        ]
        if chords > len(candidates):
            raise EmptySpec(f"cannot place {chords} chords, only {len(candidates)} slots")
        picked = rng.choice(len(candidates), size=chords, replace=False)
        for k in sorted(picked):
            add(*candidates[k])

    for h in hosts:
        attach = switches[int(rng.integers(0, len(switches)))]
        add(h, attach)

    return Topology(devices=tuple(switches + hosts), links=tuple(links))


# ------------------------------------------------------------ scenario spec


@dataclass(frozen=True)
class AttackScenario:
    kind: str
    target: str
    start: float
    duration: float
    intensity: float

    def __post_init__(self) -> None:
        if self.kind not in ATTACK_KINDS:
            raise EmptySpec(f"unknown attack kind {self.kind!r}")
        if self.start < 0 or self.duration <= 0 or self.intensity <= 0:
            raise EmptySpec(
                f"scenario needs start >= 0, duration > 0, intensity > 0, got {self}"
            )

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class ScenarioSpec:
    topology: TopologySpec
    baselines: dict[str, tuple[float, float]]
    scenarios: tuple[AttackScenario, ...]
    dt_period: float = 5.0


def scenario_spec_from_dict(raw: dict) -> ScenarioSpec:
    topo_raw = raw.get("topology") or {}
    topo = TopologySpec(
        switches=int(topo_raw.get("switches", 0)),
        hosts=int(topo_raw.get("hosts", 0)),
        wiring=str(topo_raw.get("wiring", "line")),
        seed=int(topo_raw.get("seed", 0)),
    )
    baselines_raw = raw.get("baselines") or {}
    baselines: dict[str, tuple[float, float]] = {}
    for counter in BAND_COUNTERS:
        if counter not in baselines_raw:
            raise EmptySpec(f"baselines missing {counter!r}")
        lo, hi = baselines_raw[counter]
        lo, hi = float(lo), float(hi)
        if lo < 0 or hi < lo:
            raise EmptySpec(f"bad band for {counter}: [{lo}, {hi}]")
        baselines[counter] = (lo, hi)
    dt = float(raw.get("dt_period", 5.0))
    if dt <= 0:
        raise EmptySpec(f"dt_period must be > 0, got {dt}")

    topology = build_topology(topo)
    scenarios = []
    for s in raw.get("scenarios", []):
        target = _resolve_target(str(s["target"]), topo, topology)
        scenarios.append(
            AttackScenario(
                kind=str(s["kind"]),
                target=target,
                start=float(s["start"]),
                duration=float(s["duration"]),
                intensity=float(s["intensity"]),
            )
        )
    return ScenarioSpec(
        topology=topo, baselines=baselines, scenarios=tuple(scenarios), dt_period=dt
    )


def _resolve_target(target: str, topo_spec: TopologySpec, topology: Topology) -> str:
    """Accept a full device id or the shorthand s<i> / h<j> (1-based)."""
    if target in topology.devices:
        return target
    m = re.match(r"^([sh])(\d+)$", target)
    if m:
        idx = int(m.group(2)) - 1
        if m.group(1) == "s" and 0 <= idx < topo_spec.switches:
            return _switch_id(idx)
        if m.group(1) == "h" and 0 <= idx < topo_spec.hosts:
            return _host_id(idx)
    raise UnknownDevice(f"scenario target {target!r} not in topology")


def load_scenario_spec(path: str | Path) -> ScenarioSpec:
    with open(path, encoding="utf-8") as fh:
        return scenario_spec_from_dict(json.load(fh))


# -------------------------------------------------------------- simulation


def _attack_delta(kind: str, intensity: float, baselines: dict) -> tuple[int, int, int]:
    """Per-tick (flow, packets, bytes) contribution of one active attack."""
    flow_hi = baselines["flow_count"][1]
    packets_hi = baselines["total_packets"][1]
    if kind == "dos_burst":
        flows = intensity * flow_hi
        packets = 4.0 * intensity * packets_hi
        byts = packets * DOS_FRAME
    elif kind == "scan":
        flows = 2.0 * intensity * flow_hi
        packets = flows
        byts = packets * SCAN_FRAME
    else:  # exfiltration
        flows = 2.0
        packets = intensity * packets_hi
        byts = packets * EXFIL_FRAME
    return int(round(flows)), int(round(packets)), int(round(byts))


@dataclass
class _MitigationState:
    drop: bool = False
    rate_limits: int = 0
    reroute: bool = False


class SimState:
    """One running simulation: clock, RNG stream, and mitigation table."""

    def __init__(self, spec: ScenarioSpec, seed: int | None = None):
        self.spec = spec
        self.topology = build_topology(spec.topology)
        self.seed = spec.topology.seed if seed is None else seed
        self.rng = np.random.default_rng(self.seed)
        self.clock = 0.0
        self.tick_count = 0
        self.attacked_last_tick: frozenset[str] = frozenset()
        self._mitigations: dict[str, _MitigationState] = {}
        self._receipt_counter = 0

    # ---------- helpers

    def _draw_band(self, counter: str) -> int:
        lo, hi = self.spec.baselines[counter]
        center = (lo + hi) / 2.0
        spread = (hi - lo) / (hi + lo) if (hi + lo) > 0 else 0.0
        u = self.rng.uniform(-1.0, 1.0)
        return int(np.rint(center * (1.0 + u * spread)))

    def _mitigation(self, device_id: str) -> _MitigationState:
        return self._mitigations.setdefault(device_id, _MitigationState())

    def scheduled_truth(self) -> dict[str, list[list[float]]]:
        """Ground-truth attack intervals, exactly as scheduled."""
        out: dict[str, list[list[float]]] = {}
        for s in sorted(self.spec.scenarios, key=lambda s: (s.target, s.start)):
            out.setdefault(s.target, []).append([s.start, s.end])
        return out

    def within_bands(self, snap: DeviceSnapshot) -> bool:
        for counter in BAND_COUNTERS:
            lo, hi = self.spec.baselines[counter]
            if not lo <= getattr(snap, counter) <= hi:
                return False
        return True

    # ---------- stepping

    def advance_tick(self) -> list[DeviceSnapshot]:
        """Advance the clock by one dt and emit one snapshot per device."""
        self.clock += self.spec.dt_period
        self.tick_count += 1
        t = self.clock

        contributions: dict[str, list[int]] = {}
        attacked: set[str] = set()
        for scen in self.spec.scenarios:
            if not scen.start <= t < scen.end:
                continue
            attacked.add(scen.target)
            delta = _attack_delta(scen.kind, scen.intensity, self.spec.baselines)
            dest = scen.target
            if self._mitigation(dest).reroute:
                neigh = self.topology.neighbors(dest)
                if neigh:
                    dest = neigh[0]
            policy = self._mitigation(dest)
            if policy.drop:
                continue
            factor = 0.5 ** policy.rate_limits
            flows, packets, byts = (int(round(v * factor)) for v in delta)
            acc = contributions.setdefault(dest, [0, 0, 0])
            acc[0] += flows
            acc[1] += packets
            acc[2] += byts

        snaps = []
        for dev in self.topology.devices:
            flow = self._draw_band("flow_count")
            packets = self._draw_band("total_packets")
            byts = self._draw_band("total_bytes")
            extra = contributions.get(dev)
            if extra:
                flow += extra[0]
                packets += extra[1]
                byts += extra[2]
            snaps.append(
                DeviceSnapshot(
                    ts=t,
                    device_id=dev,
                    flow_count=flow,
                    total_packets=packets,
                    total_bytes=byts,
                    avg_packet_size=byts / packets if packets > 0 else 0.0,
                    link_count=self.topology.degree(dev),
                )
            )
        self.attacked_last_tick = frozenset(attacked)
        return snaps

    # ---------- control

    def apply_mitigation(self, cmd: MitigationCommand) -> dict:
        """Record a mitigation; it takes effect on the next tick."""
        if cmd.device_id not in self.topology.devices:
            raise UnknownDevice(f"no such device {cmd.device_id!r}")
        state = self._mitigation(cmd.device_id)
        if cmd.action == "drop":
            state.drop = True
        elif cmd.action == "rate_limit":
            state.rate_limits += 1
        else:  # reroute
            if not self.topology.neighbors(cmd.device_id):
                raise NoNeighbor(f"{cmd.device_id} has no neighbor to reroute to")
            state.reroute = True
        self._receipt_counter += 1
        return {
            "receipt_id": self._receipt_counter,
            "device_id": cmd.device_id,
            "action": cmd.action,
            "applied_at": self.clock,
        }


def run_scenario(
    spec: ScenarioSpec, duration: float, seed: int, out_dir: str | Path
) -> tuple[Path, Path]:
    """Run for `duration` seconds and write snapshots.ndjson plus truth.json."""
    dt = spec.dt_period
    n_ticks = duration / dt
    if abs(n_ticks - round(n_ticks)) > 1e-9:
        raise EmptySpec(f"duration {duration} is not a multiple of dt_period {dt}")
    n_ticks = int(round(n_ticks))

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sim = SimState(spec, seed=seed)

    snapshots_path = out_dir / "snapshots.ndjson"
    truth_path = out_dir / "truth.json"
    # Write-then-rename: an interrupted run must not leave truncated files.
    snap_tmp = snapshots_path.with_suffix(".ndjson.tmp")
    with open(snap_tmp, "w", encoding="utf-8") as fh:
        for _ in range(n_ticks):
            for snap in sim.advance_tick():
                fh.write(json.dumps(snap.to_json_dict()) + "\n")
    truth_tmp = truth_path.with_suffix(".json.tmp")
    with open(truth_tmp, "w", encoding="utf-8") as fh:
        json.dump(sim.scheduled_truth(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(snap_tmp, snapshots_path)
    os.replace(truth_tmp, truth_path)
    return snapshots_path, truth_path
