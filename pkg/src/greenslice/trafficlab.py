"""Scenario traffic, the overflow loss model, the CPU proxy and per-slot metrics."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .constellation import Constellation, TopologySnapshot
from .linkstate import LinkState, states_for, update_link_state

SCHEMES = ("ospf", "srv6", "green", "flexalgo")
SCENARIOS = ("default", "high-demand", "urgent-flow")

DEFAULT, HIGH_DEMAND, URGENT = "default", "high-demand", "urgent"

DEFAULT_BURSTS = ((100, 160), (250, 310), (400, 460))


class RoutingError(RuntimeError):
    """A route refers to a link that is not in the snapshot."""


@dataclass(frozen=True)
class Demand:
    id: int
    source: int
    destination: int
    bandwidth_mbps: float
    cls: str = DEFAULT
    active_slots: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if not self.bandwidth_mbps > 0:
            raise ValueError(f"demand {self.id}: bandwidth must be > 0")
        if self.source == self.destination:
            raise ValueError(f"demand {self.id}: source equals destination")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "default"
    total_slots: int = 500
    base_load_mbps: float = 20.0
    burst_load_mbps: float = 30.0
    urgent_load_mbps: float = 1.0
    burst_intervals: tuple[tuple[int, int], ...] = DEFAULT_BURSTS
    urgent_intervals: tuple[tuple[int, int], ...] = DEFAULT_BURSTS
    packet_timeout_s: float = 1.0  # carried for completeness; the loss model ignores it
    source: str = "Ottawa"
    destination: str = "Vancouver"
    jitter_mbps: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.name not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.name!r}")
        if self.total_slots <= 0:
            raise ValueError("total_slots must be positive")
        if min(self.base_load_mbps, self.burst_load_mbps, self.urgent_load_mbps) <= 0:
            raise ValueError("loads must be positive")
        if self.burst_load_mbps < self.base_load_mbps:
            raise ValueError("burst load below base load")
        if self.jitter_mbps < 0 or self.jitter_mbps >= self.base_load_mbps:
            raise ValueError("jitter must lie in [0, base load)")
        for lo, hi in self.burst_intervals + self.urgent_intervals:
            if not 0 <= lo < hi <= self.total_slots:
                raise ValueError(f"interval [{lo}, {hi}) outside [0, {self.total_slots})")

    def in_burst(self, slot: int) -> bool:
        return self.name == "high-demand" and _inside(slot, self.burst_intervals)

    def in_urgent(self, slot: int) -> bool:
        return self.name == "urgent-flow" and _inside(slot, self.urgent_intervals)

    def event_slots(self) -> list[int]:
        """Slots inside this scenario's burst or urgent windows."""
        return [s for s in range(self.total_slots) if self.in_burst(s) or self.in_urgent(s)]


def _inside(slot: int, intervals: Iterable[tuple[int, int]]) -> bool:
    return any(lo <= slot < hi for lo, hi in intervals)


def generate_demands(scenario: ScenarioConfig, slot: int, constellation: Constellation) -> list[Demand]:
    """Connections active in ``slot``.

    The bulk connection always carries the base load.  A hot-spot burst adds
    a second bulk connection carrying the excess up to ``burst_load_mbps``;
    an urgent window adds a thin urgent-class probe stream.
    """
    if not 0 <= slot < scenario.total_slots:
        raise ValueError(f"slot {slot} outside scenario")
    src = constellation.station_id(scenario.source)
    dst = constellation.station_id(scenario.destination)
    base = scenario.base_load_mbps
    if scenario.jitter_mbps > 0:
        rng = np.random.default_rng([scenario.seed, slot])
        base += float(rng.uniform(-scenario.jitter_mbps, scenario.jitter_mbps))
    out = [Demand(0, src, dst, base, DEFAULT)]
    if scenario.in_burst(slot):
        extra = scenario.burst_load_mbps - scenario.base_load_mbps
        if extra > 0:
            out.append(Demand(1, src, dst, extra, HIGH_DEMAND, scenario.burst_intervals))
    if scenario.in_urgent(slot):
        out.append(Demand(2, src, dst, scenario.urgent_load_mbps, URGENT, scenario.urgent_intervals))
    return out


def _key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class TrafficOutcome:
    delivered: dict[int, float]
    offered: dict[int, float]
    link_offered: dict[tuple[int, int], float]
    link_fraction: dict[tuple[int, int], float]
    states: dict[tuple[int, int], LinkState]


def apply_traffic(snapshot: TopologySnapshot, states: Mapping[tuple[int, int], LinkState] | None,
                  routed_paths: Mapping[int, Sequence[int] | None],
                  demands: Sequence[Demand]) -> TrafficOutcome:
    """Push every routed demand through the overflow loss model."""
    links = snapshot.link_map()
    load: dict[tuple[int, int], float] = {}
    for dem in demands:
        path = routed_paths.get(dem.id)
        if not path:
            continue
        for a, b in zip(path, path[1:]):
            key = _key(a, b)
            if key not in links:
                raise RoutingError(f"demand {dem.id} uses absent link {key} in slot {snapshot.slot_index}")
            load[key] = load.get(key, 0.0) + dem.bandwidth_mbps
    frac = {key: min(1.0, links[key].capacity_mbps / off) for key, off in load.items()}
    delivered, offered = {}, {}
    for dem in demands:
        offered[dem.id] = dem.bandwidth_mbps
        path = routed_paths.get(dem.id)
        if not path:
            delivered[dem.id] = 0.0
            continue
        share = 1.0
        for a, b in zip(path, path[1:]):
            share *= frac[_key(a, b)]
        delivered[dem.id] = dem.bandwidth_mbps * share
    current = states_for(snapshot, states)
    new_states = {}
    for key, st in current.items():
        off = load.get(key, 0.0)
        new_states[key] = update_link_state(st, off, off * frac.get(key, 1.0))
    return TrafficOutcome(delivered, offered, load, frac, new_states)


# -- CPU proxy -----------------------------------------------------------------

@dataclass(frozen=True)
class SchemeCosts:
    """Per-scheme CPU coefficients (percent per unit of activity)."""
    fwd_per_mbps: float
    per_entry: float
    per_event: float
    per_spf: float


@dataclass(frozen=True)
class SatelliteActivity:
    forwarded_mbps: float = 0.0
    flow_entries: int = 0
    control_events: int = 0
    spf_runs: int = 0
    stations_in_view: int = 0


# Calibrated once so default-scenario averages order ospf > srv6 > green ~ flexalgo.
DEFAULT_COSTS = {
    "ospf": SchemeCosts(fwd_per_mbps=0.18, per_entry=0.25, per_event=5.0, per_spf=20.0),
    "srv6": SchemeCosts(fwd_per_mbps=0.18, per_entry=3.0, per_event=2.0, per_spf=1.0),
    "green": SchemeCosts(fwd_per_mbps=0.18, per_entry=3.0, per_event=2.0, per_spf=1.0),
    "flexalgo": SchemeCosts(fwd_per_mbps=0.18, per_entry=3.0, per_event=2.0, per_spf=1.0),
}


@dataclass(frozen=True)
class CpuModel:
    base_idle: float = 2.0
    access_per_station: float = 4.0
    costs: Mapping[str, SchemeCosts] = field(default_factory=lambda: dict(DEFAULT_COSTS))

    def activation_power(self, scheme: str, load_mbps: float) -> float:
        return self.costs[scheme].fwd_per_mbps * load_mbps

    def node_power(self, snapshot: TopologySnapshot, scheme: str, load_mbps: float) -> np.ndarray:
        """Predicted CPU of each satellite if it carried ``load_mbps`` (ground nodes 0)."""
        p = np.zeros(snapshot.n_nodes)
        p[: snapshot.n_satellites] = (self.base_idle + self.access_per_station * snapshot.stations_in_view()
                                      + self.activation_power(scheme, load_mbps))
        return p


def cpu_proxy(scheme: str, activity: SatelliteActivity, model: CpuModel = CpuModel()) -> float:
    """CPU usage (percent) of one satellite for one slot."""
    c = model.costs[scheme]
    raw = (model.base_idle + model.access_per_station * activity.stations_in_view
           + c.fwd_per_mbps * activity.forwarded_mbps + c.per_entry * activity.flow_entries
           + c.per_event * activity.control_events + c.per_spf * activity.spf_runs)
    return float(min(max(raw, 0.0), 100.0))


# -- metrics ---------------------------------------------------------------------

@dataclass(frozen=True)
class MetricsRecord:
    slot: int
    scheme: str
    cpu_avg: float
    pdr: float
    latency_ms: float | None

    def row(self) -> list[str]:
        lat = "" if self.latency_ms is None else f"{self.latency_ms:.6f}"
        return [str(self.slot), self.scheme, f"{self.cpu_avg:.6f}", f"{self.pdr:.6f}", lat]


METRICS_HEADER = ["slot", "scheme", "cpu_avg", "pdr", "latency_ms"]


def record_metrics(slot: int, scheme: str, delivered: Mapping[int, float], offered: Mapping[int, float],
                   path_delays: Mapping[int, float], cpu_values: Mapping[int, float]) -> MetricsRecord:
    """Aggregate one (slot, scheme).

    ``cpu_values`` holds the CPU of activated satellites only; ``path_delays``
    the end-to-end delay of every routed demand.  With nothing offered the
    PDR is 1.0 by convention and latency is absent.
    """
    total_off = sum(offered.values())
    total_del = sum(delivered.get(k, 0.0) for k in offered)
    pdr = 1.0 if total_off <= 0 else total_del / total_off
    weights = {k: offered[k] for k in path_delays if k in offered}
    wsum = sum(weights.values())
    latency = None if wsum <= 0 else sum(path_delays[k] * w for k, w in weights.items()) / wsum
    cpu = float(np.mean(list(cpu_values.values()))) if cpu_values else 0.0
    return MetricsRecord(slot, scheme, cpu, pdr, latency)


def metrics_csv(records: Iterable[MetricsRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def empirical_cdf(values: Iterable[float]) -> list[tuple[float, float]]:
    """Right-continuous step CDF as ``(value, P[X <= value])`` at each distinct value."""
    vals = sorted(v for v in values if v is not None and not math.isnan(v))
    n = len(vals)
    out: list[tuple[float, float]] = []
    for i, v in enumerate(vals):
        if i + 1 < n and vals[i + 1] == v:
            continue
        out.append((v, (i + 1) / n))
    return out
