"""Scenario runner: config loading, the slot loop over all schemes, ledgers and summaries.

A run directory holds::

    metrics.csv             slot, scheme, cpu_avg, pdr, latency_ms
    decisions.csv           per (slot, scheme) controller decisions
    cdf_<metric>_<scheme>.csv
    summary.json            recomputable from the two ledgers
    config.resolved.yaml    the fully defaulted config that produced the run
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import yaml

from .constellation import (DEFAULT_STATIONS, LIGHTSPEED_SHELLS, ConfigurationError, GroundStation,
                            ShellConfig, build_constellation, propagate)
from .controller import ControllerConfig, SlicePolicy, SolveCache, initial_state, step
from .linkstate import states_for
from .milp import MilpLimits, SolverBudgetError, check_constraints
from .trafficlab import (DEFAULT_COSTS, METRICS_HEADER, SCENARIOS, SCHEMES, URGENT, CpuModel, SatelliteActivity,
                         SchemeCosts, ScenarioConfig, apply_traffic, cpu_proxy, empirical_cdf,
                         generate_demands, metrics_csv, record_metrics)

log = logging.getLogger(__name__)

METRICS = ("cpu_avg", "pdr", "latency_ms")
DECISIONS_HEADER = ["slot", "scheme", "active_slice", "solve_time_s", "control_events", "event_slot",
                    "bulk_latency_ms", "urgent_latency_ms", "spf_delay_130_ms", "spf_delay_129_ms",
                    "spf_delay_128_ms", "unrouted"]
SPF_RUNS = {"ospf": 1, "srv6": 1, "green": 1, "flexalgo": 3}
BREACH_SLOTS = 3  # consecutive slots without a solution before a run is aborted


class ConfigError(ValueError):
    """Schema violation, anchored to a line of the config file when known."""

    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}" if line else source
        super().__init__(f"{where}: {message}")


class BudgetBreachError(RuntimeError):
    """The solver produced nothing within budget on several consecutive slots."""


# -- config ----------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    shells: tuple[ShellConfig, ...] = LIGHTSPEED_SHELLS
    stations: tuple[GroundStation, ...] = DEFAULT_STATIONS
    slot_duration_s: float = 10.0
    isl_capacity_mbps: float = 25.0
    ground_capacity_mbps: float = 25.0
    scenario: ScenarioConfig = ScenarioConfig()
    policy: SlicePolicy = SlicePolicy()
    limits: MilpLimits = MilpLimits()
    solver: str = "highs"
    solver_budget_s: float = 10.0
    cpu: CpuModel = CpuModel()
    schemes: tuple[str, ...] = SCHEMES
    output_dir: str = "runs/out"
    seed: int = 0

    def controller_config(self) -> ControllerConfig:
        return ControllerConfig(self.policy, self.limits, self.cpu, self.solver_budget_s, self.solver,
                                self.scenario.base_load_mbps)

    def with_overrides(self, *, schemes=None, slots=None, seed=None, solver_budget_s=None,
                       output_dir=None) -> "RunConfig":
        cfg = self
        if schemes is not None:
            bad = [s for s in schemes if s not in SCHEMES]
            if bad or not schemes:
                raise ConfigError(f"unknown schemes {bad}; choose from {list(SCHEMES)}")
            cfg = replace(cfg, schemes=tuple(schemes))
        if slots is not None:
            if slots <= 0:
                raise ConfigError("--slots must be positive")
            clip = lambda ivs: tuple((lo, min(hi, slots)) for lo, hi in ivs if lo < slots)
            sc = cfg.scenario
            cfg = replace(cfg, scenario=replace(sc, total_slots=slots, burst_intervals=clip(sc.burst_intervals),
                                                urgent_intervals=clip(sc.urgent_intervals)))
        if seed is not None:
            cfg = replace(cfg, seed=seed, scenario=replace(cfg.scenario, seed=seed))
        if solver_budget_s is not None:
            if not solver_budget_s > 0:
                raise ConfigError("--solver-budget-s must be positive")
            cfg = replace(cfg, solver_budget_s=solver_budget_s)
        if output_dir is not None:
            cfg = replace(cfg, output_dir=str(output_dir))
        return cfg

    def to_dict(self) -> dict:
        sc = self.scenario
        return {
            "constellation": {
                "shells": [{"name": s.name, "satellite_count": s.satellite_count, "altitude_km": s.altitude_km,
                            "inclination_deg": s.inclination_deg, "plane_count": s.plane_count,
                            "phasing": s.phasing, "raan_spread_deg": s.raan_spread_deg,
                            "isl_latitude_limit_deg": s.isl_latitude_limit_deg} for s in self.shells],
                "stations": [{"name": g.name, "latitude_deg": g.latitude_deg, "longitude_deg": g.longitude_deg,
                              "min_elevation_deg": g.min_elevation_deg} for g in self.stations],
                "slot_duration_s": self.slot_duration_s,
                "isl_capacity_mbps": self.isl_capacity_mbps,
                "ground_capacity_mbps": self.ground_capacity_mbps,
            },
            "scenario": {
                "name": sc.name, "total_slots": sc.total_slots, "base_load_mbps": sc.base_load_mbps,
                "burst_load_mbps": sc.burst_load_mbps, "urgent_load_mbps": sc.urgent_load_mbps,
                "burst_intervals": [list(iv) for iv in sc.burst_intervals],
                "urgent_intervals": [list(iv) for iv in sc.urgent_intervals],
                "packet_timeout_s": sc.packet_timeout_s, "source": sc.source,
                "destination": sc.destination, "jitter_mbps": sc.jitter_mbps,
            },
            "policy": {"utilization_threshold": self.policy.utilization_threshold,
                       "release_after_calm_slots": self.policy.release_after_calm_slots},
            "milp": {"power_limit": self.limits.power_limit, "node_delay_ms": self.limits.node_delay_ms,
                     "shared_capacity": self.limits.shared_capacity, "solver": self.solver,
                     "solver_budget_s": self.solver_budget_s},
            "cpu": {"base_idle": self.cpu.base_idle, "access_per_station": self.cpu.access_per_station,
                    "costs": {k: vars(v).copy() for k, v in self.cpu.costs.items()}},
            "schemes": list(self.schemes),
            "output_dir": self.output_dir,
            "seed": self.seed,
        }


_SCHEMA = {
    "constellation": {"shells", "stations", "slot_duration_s", "isl_capacity_mbps", "ground_capacity_mbps",
                      "min_elevation_deg"},
    "scenario": {"name", "total_slots", "base_load_mbps", "burst_load_mbps", "urgent_load_mbps",
                 "burst_intervals", "urgent_intervals", "packet_timeout_s", "source", "destination",
                 "jitter_mbps"},
    "policy": {"utilization_threshold", "release_after_calm_slots"},
    "milp": {"power_limit", "node_delay_ms", "shared_capacity", "solver", "solver_budget_s"},
    "cpu": {"base_idle", "access_per_station", "costs"},
    "schemes": None, "output_dir": None, "seed": None,
}
_SHELL_KEYS = {"name", "satellite_count", "altitude_km", "inclination_deg", "plane_count", "phasing",
               "raan_spread_deg", "isl_latitude_limit_deg"}
_STATION_KEYS = {"name", "latitude_deg", "longitude_deg", "min_elevation_deg"}
_COST_KEYS = {"fwd_per_mbps", "per_entry", "per_event", "per_spf"}


def _index_lines(node, path=(), out=None) -> dict[tuple, int]:
    """Map every key path of a composed YAML document to its 1-based line."""
    out = {} if out is None else out
    out.setdefault(path, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            out[path + (k.value,)] = k.start_mark.line + 1
            _index_lines(v, path + (k.value,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            out[path + (i,)] = v.start_mark.line + 1
            _index_lines(v, path + (i,), out)
    return out


class _Reader:
    def __init__(self, lines: dict[tuple, int], source: str):
        self.lines = lines
        self.source = source

    def fail(self, path: tuple, message: str):
        p = tuple(path)
        while p and p not in self.lines:
            p = p[:-1]
        dotted = ".".join(str(x) for x in path) or "<root>"
        raise ConfigError(f"{dotted}: {message}", self.lines.get(p), self.source)

    def mapping(self, value, path, allowed) -> dict:
        if value is None:
            return {}
        if not isinstance(value, dict):
            self.fail(path, "expected a mapping")
        for k in value:
            if k not in allowed:
                self.fail(tuple(path) + (k,), f"unknown key (allowed: {', '.join(sorted(allowed))})")
        return value

    def number(self, data, key, path, default, *, positive=False, minimum=None, integer=False):
        if key not in data:
            return default
        v = data[key]
        here = tuple(path) + (key,)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(here, f"expected a number, got {v!r}")
        if integer and not (isinstance(v, int) or float(v).is_integer()):
            self.fail(here, f"expected an integer, got {v!r}")
        if isinstance(v, float) and not math.isfinite(v):
            self.fail(here, "must be finite")
        if positive and not v > 0:
            self.fail(here, "must be positive")
        if minimum is not None and v < minimum:
            self.fail(here, f"must be >= {minimum}")
        return int(v) if integer else float(v)

    def string(self, data, key, path, default, choices=None):
        if key not in data:
            return default
        v = data[key]
        if not isinstance(v, str):
            self.fail(tuple(path) + (key,), f"expected a string, got {v!r}")
        if choices is not None and v not in choices:
            self.fail(tuple(path) + (key,), f"{v!r} not one of {list(choices)}")
        return v

    def intervals(self, data, key, path, default):
        if key not in data:
            return default
        v = data[key]
        here = tuple(path) + (key,)
        if not isinstance(v, list):
            self.fail(here, "expected a list of [start, end] pairs")
        out = []
        for i, iv in enumerate(v):
            if (not isinstance(iv, list) or len(iv) != 2
                    or not all(isinstance(x, int) and not isinstance(x, bool) for x in iv)):
                self.fail(here + (i,), "expected [start, end] with integer slots")
            out.append((iv[0], iv[1]))
        return tuple(out)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse and schema-check a YAML run config."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ConfigError(f"YAML syntax error: {exc.problem}", mark.line + 1 if mark else None, source) from None
    if data is None:
        data = {}
    r = _Reader(_index_lines(node) if node is not None else {}, source)
    r.mapping(data, (), set(_SCHEMA))
    base = RunConfig()

    con = r.mapping(data.get("constellation"), ("constellation",), _SCHEMA["constellation"])
    p = ("constellation",)
    shells = base.shells
    if "shells" in con:
        if not isinstance(con["shells"], list) or not con["shells"]:
            r.fail(p + ("shells",), "expected a non-empty list of shells")
        shells = []
        for i, s in enumerate(con["shells"]):
            sp = p + ("shells", i)
            s = r.mapping(s, sp, _SHELL_KEYS)
            for req in ("satellite_count", "altitude_km", "inclination_deg", "plane_count"):
                if req not in s:
                    r.fail(sp, f"missing required key {req!r}")
            lim = s.get("isl_latitude_limit_deg")
            shell = ShellConfig(
                satellite_count=r.number(s, "satellite_count", sp, None, positive=True, integer=True),
                altitude_km=r.number(s, "altitude_km", sp, None),
                inclination_deg=r.number(s, "inclination_deg", sp, None),
                plane_count=r.number(s, "plane_count", sp, None, positive=True, integer=True),
                phasing=r.number(s, "phasing", sp, 0, integer=True, minimum=0),
                raan_spread_deg=r.number(s, "raan_spread_deg", sp, 360.0, positive=True),
                isl_latitude_limit_deg=None if lim is None else r.number(s, "isl_latitude_limit_deg", sp, None),
                name=r.string(s, "name", sp, f"shell{i}"),
            )
            try:
                shell.validate()
            except ConfigurationError as exc:
                r.fail(sp, str(exc))
            shells.append(shell)
        shells = tuple(shells)
    mask = r.number(con, "min_elevation_deg", p, None, minimum=0.0)
    stations = base.stations
    if "stations" in con:
        if not isinstance(con["stations"], list) or not con["stations"]:
            r.fail(p + ("stations",), "expected a non-empty list of stations")
        stations = []
        for i, g in enumerate(con["stations"]):
            gp = p + ("stations", i)
            g = r.mapping(g, gp, _STATION_KEYS)
            for req in ("name", "latitude_deg", "longitude_deg"):
                if req not in g:
                    r.fail(gp, f"missing required key {req!r}")
            st = GroundStation(r.string(g, "name", gp, None), r.number(g, "latitude_deg", gp, None),
                               r.number(g, "longitude_deg", gp, None),
                               r.number(g, "min_elevation_deg", gp, 25.0 if mask is None else mask))
            try:
                st.validate()
            except ConfigurationError as exc:
                r.fail(gp, str(exc))
            stations.append(st)
        stations = tuple(stations)
    elif mask is not None:
        stations = tuple(replace(g, min_elevation_deg=mask) for g in stations)
    if len({g.name for g in stations}) != len(stations):
        r.fail(p + ("stations",), "station names must be unique")

    sc = r.mapping(data.get("scenario"), ("scenario",), _SCHEMA["scenario"])
    p = ("scenario",)
    d = ScenarioConfig()
    names = [g.name for g in stations]
    scenario = ScenarioConfig(
        name=r.string(sc, "name", p, d.name, SCENARIOS),
        total_slots=r.number(sc, "total_slots", p, d.total_slots, positive=True, integer=True),
        base_load_mbps=r.number(sc, "base_load_mbps", p, d.base_load_mbps, positive=True),
        burst_load_mbps=r.number(sc, "burst_load_mbps", p, d.burst_load_mbps, positive=True),
        urgent_load_mbps=r.number(sc, "urgent_load_mbps", p, d.urgent_load_mbps, positive=True),
        burst_intervals=r.intervals(sc, "burst_intervals", p, d.burst_intervals),
        urgent_intervals=r.intervals(sc, "urgent_intervals", p, d.urgent_intervals),
        packet_timeout_s=r.number(sc, "packet_timeout_s", p, d.packet_timeout_s, positive=True),
        source=r.string(sc, "source", p, d.source, names),
        destination=r.string(sc, "destination", p, d.destination, names),
        jitter_mbps=r.number(sc, "jitter_mbps", p, d.jitter_mbps, minimum=0.0),
    )
    if scenario.source == scenario.destination:
        r.fail(p + ("destination",), "must differ from source")

    pol = r.mapping(data.get("policy"), ("policy",), _SCHEMA["policy"])
    p = ("policy",)
    policy = SlicePolicy(
        utilization_threshold=r.number(pol, "utilization_threshold", p, base.policy.utilization_threshold,
                                       positive=True),
        release_after_calm_slots=r.number(pol, "release_after_calm_slots", p,
                                          base.policy.release_after_calm_slots, integer=True, minimum=0),
    )

    mi = r.mapping(data.get("milp"), ("milp",), _SCHEMA["milp"])
    p = ("milp",)
    shared = mi.get("shared_capacity", base.limits.shared_capacity)
    if not isinstance(shared, bool):
        r.fail(p + ("shared_capacity",), "expected true or false")
    limits = MilpLimits(r.number(mi, "power_limit", p, base.limits.power_limit, positive=True),
                        r.number(mi, "node_delay_ms", p, base.limits.node_delay_ms, minimum=0.0), shared)

    cp = r.mapping(data.get("cpu"), ("cpu",), _SCHEMA["cpu"])
    p = ("cpu",)
    costs = dict(DEFAULT_COSTS)
    if "costs" in cp:
        raw = r.mapping(cp["costs"], p + ("costs",), set(SCHEMES))
        for scheme, vals in raw.items():
            cpath = p + ("costs", scheme)
            vals = r.mapping(vals, cpath, _COST_KEYS)
            dflt = DEFAULT_COSTS[scheme]
            costs[scheme] = SchemeCosts(*(r.number(vals, k, cpath, getattr(dflt, k), minimum=0.0)
                                          for k in ("fwd_per_mbps", "per_entry", "per_event", "per_spf")))
    cpu = CpuModel(r.number(cp, "base_idle", p, base.cpu.base_idle, minimum=0.0),
                   r.number(cp, "access_per_station", p, base.cpu.access_per_station, minimum=0.0), costs)

    schemes = base.schemes
    if "schemes" in data:
        v = data["schemes"]
        if not isinstance(v, list) or not v:
            r.fail(("schemes",), "expected a non-empty list")
        for i, s in enumerate(v):
            if s not in SCHEMES:
                r.fail(("schemes", i), f"{s!r} not one of {list(SCHEMES)}")
        if len(set(v)) != len(v):
            r.fail(("schemes",), "duplicate scheme")
        schemes = tuple(v)
    seed = r.number(data, "seed", (), base.seed, integer=True, minimum=0)
    cfg = RunConfig(
        shells=shells, stations=stations,
        slot_duration_s=r.number(con, "slot_duration_s", ("constellation",), base.slot_duration_s, positive=True),
        isl_capacity_mbps=r.number(con, "isl_capacity_mbps", ("constellation",), base.isl_capacity_mbps,
                                   positive=True),
        ground_capacity_mbps=r.number(con, "ground_capacity_mbps", ("constellation",),
                                      base.ground_capacity_mbps, positive=True),
        scenario=replace(scenario, seed=seed), policy=policy, limits=limits,
        solver=r.string(mi, "solver", ("milp",), base.solver, ("highs", "bnb")),
        solver_budget_s=r.number(mi, "solver_budget_s", ("milp",), base.solver_budget_s, positive=True),
        cpu=cpu, schemes=schemes,
        output_dir=r.string(data, "output_dir", (), base.output_dir), seed=seed,
    )
    try:
        cfg.scenario.validate()
    except ValueError as exc:
        r.fail(("scenario",), str(exc))
    return cfg


def load_config(path: str | os.PathLike) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse_config(text, str(path))


# -- the slot loop -------------------------------------------------------------------

@dataclass
class RunResult:
    config: RunConfig
    records: list = field(default_factory=list)
    decisions: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    violations: list[str] = field(default_factory=list)
    audited: int = 0
    warnings: list[str] = field(default_factory=list)
    output_dir: Path | None = None


def _activity(scheme: str, snapshot, demands, routes, events, n_nodes) -> dict[int, SatelliteActivity]:
    """Per-satellite activity of one slot; satellites absent from the result are idle."""
    n = snapshot.n_satellites
    fwd = np.zeros(n)
    entries = np.zeros(n, dtype=int)
    ctrl = np.zeros(n, dtype=int)
    for d in demands:
        r = routes.get(d.id)
        if r is None:
            continue
        sats = [v for v in r.node_sequence if v < n]
        fwd[sats] += d.bandwidth_mbps
        if scheme == "srv6":
            entries[sats] += 1
        elif scheme in ("green", "flexalgo"):
            entries[[v for v in r.sid_stack if v < n]] += 1
    for v, c in events.items():
        if v < n:
            ctrl[v] += c
    if scheme == "ospf":
        # every slot moves the topology: full table rebuild and one flood at every satellite
        entries[:] = n_nodes
        ctrl += 1
    view = snapshot.stations_in_view()
    spf = SPF_RUNS[scheme]
    out = {}
    for v in range(n):
        if fwd[v] > 0 or entries[v] > 0 or ctrl[v] > 0:
            out[v] = SatelliteActivity(float(fwd[v]), int(entries[v]), int(ctrl[v]), spf, int(view[v]))
    return out


def _fmt(v) -> str:
    return "" if v is None else f"{v:.6f}"


def run(config: RunConfig, *, write: bool = True, audit: bool = True, progress=None) -> RunResult:
    """Execute every slot for every configured scheme over one shared snapshot sequence."""
    constellation = build_constellation(config.shells, config.stations,
                                        isl_capacity_mbps=config.isl_capacity_mbps,
                                        ground_capacity_mbps=config.ground_capacity_mbps)
    scenario = config.scenario
    ctrl = config.controller_config()
    result = RunResult(config)
    states = {s: None for s in config.schemes}
    scheme_states = {s: initial_state(s) for s in config.schemes}
    breaches = {s: 0 for s in config.schemes}
    cache = SolveCache()
    for slot in range(scenario.total_slots):
        snap = propagate(constellation, slot, config.slot_duration_s)
        demands = generate_demands(scenario, slot, constellation)
        event = scenario.in_burst(slot) or scenario.in_urgent(slot)
        for scheme in config.schemes:
            cur = states_for(snap, states[scheme])
            try:
                res = step(slot, snap, cur, demands, scheme_states[scheme], ctrl, cache)
                breaches[scheme] = 0
            except SolverBudgetError as exc:
                breaches[scheme] += 1
                msg = f"slot {slot} {scheme}: {exc}"
                result.warnings.append(msg)
                log.warning(msg)
                if breaches[scheme] >= BREACH_SLOTS:
                    raise BudgetBreachError(f"{scheme}: no solution within budget for "
                                            f"{BREACH_SLOTS} consecutive slots (last slot {slot})") from exc
                res = None
            if res is None:
                routes, events, solve_t, active, delays = {}, {}, ctrl.solver_budget_s, \
                    scheme_states[scheme].active_slice, {}
            else:
                scheme_states[scheme] = res.state
                routes, events, solve_t, active, delays = (res.routes, res.control_events, res.solve_time_s,
                                                           res.state.active_slice, res.slice_delays)
                result.warnings.extend(res.warnings)
                if audit:
                    for model, sol in res.solutions.values():
                        if sol.assignment is not None:
                            result.audited += 1
                            result.violations.extend(f"slot {slot} {scheme}: {v}"
                                                     for v in check_constraints(model, sol.assignment))
            paths = {k: r.node_sequence for k, r in routes.items() if r is not None}
            outcome = apply_traffic(snap, cur, paths, demands)
            states[scheme] = outcome.states
            acts = _activity(scheme, snap, demands, routes, events, snap.n_nodes)
            cpu = {v: cpu_proxy(scheme, a, config.cpu) for v, a in acts.items()}
            delays_by_demand = {k: r.total_delay_ms for k, r in routes.items() if r is not None}
            result.records.append(record_metrics(slot, scheme, outcome.delivered, outcome.offered,
                                                 delays_by_demand, cpu))
            urgent = next((d.id for d in demands if d.cls == URGENT), None)
            result.decisions.append({
                "slot": slot, "scheme": scheme,
                "active_slice": "" if active is None else str(active),
                "solve_time_s": f"{solve_t:.6f}",
                "control_events": str(sum(events.values()) + (snap.n_satellites if scheme == "ospf" else 0)),
                "event_slot": "1" if event else "0",
                "bulk_latency_ms": _fmt(delays_by_demand.get(0)),
                "urgent_latency_ms": _fmt(delays_by_demand.get(urgent)) if urgent is not None else "",
                "spf_delay_130_ms": _fmt(delays.get(130)),
                "spf_delay_129_ms": _fmt(delays.get(129)),
                "spf_delay_128_ms": _fmt(delays.get(128)),
                "unrouted": str(sum(1 for d in demands if routes.get(d.id) is None)),
            })
        if progress is not None:
            progress(slot)
    result.summary = summarize(metrics_rows(result.records), result.decisions, scenario.name)
    if write:
        result.output_dir = write_outputs(config, result)
    return result


# -- ledgers, CDFs and the summary ----------------------------------------------------

def metrics_rows(records) -> list[dict]:
    return [dict(zip(METRICS_HEADER, r.row())) for r in records]


def decisions_csv(rows: Iterable[Mapping[str, str]]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, DECISIONS_HEADER, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def read_csv(path: str | os.PathLike) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _values(ledger: Iterable[Mapping[str, str]], metric: str, scheme: str) -> list[float]:
    return [float(r[metric]) for r in ledger if r["scheme"] == scheme and r.get(metric, "") != ""]


def export_cdf(ledger: Iterable[Mapping[str, str]], metric: str, scheme: str) -> list[tuple[float, float]]:
    """Empirical CDF of ``metric`` for ``scheme`` from metrics-ledger rows."""
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    return empirical_cdf(_values(ledger, metric, scheme))


def cdf_csv(table: Sequence[tuple[float, float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["value", "cumulative_probability"])
    for v, p in table:
        w.writerow([f"{v:.6f}", f"{p:.6f}"])
    return buf.getvalue()


def _stats(vals: Sequence[float]) -> dict | None:
    if not vals:
        return None
    a = np.asarray(vals, dtype=float)
    return {"mean": float(a.mean()), "p5": float(np.percentile(a, 5)),
            "p50": float(np.percentile(a, 50)), "p95": float(np.percentile(a, 95)),
            "min": float(a.min()), "max": float(a.max())}


def summarize(metrics: Sequence[Mapping[str, str]], decisions: Sequence[Mapping[str, str]],
              scenario: str) -> dict:
    """Per-scheme statistics and headline deltas, derived only from the two ledgers."""
    schemes = list(dict.fromkeys(r["scheme"] for r in metrics))
    events = {(int(r["slot"]), r["scheme"]): r["event_slot"] == "1" for r in decisions}
    per = {s: {m: _stats(_values(metrics, m, s)) for m in METRICS} for s in schemes}
    head: dict[str, Any] = {}
    if "ospf" in per and per["ospf"]["cpu_avg"]:
        base = per["ospf"]["cpu_avg"]["mean"]
        head["cpu_reduction_vs_ospf"] = {s: 1.0 - per[s]["cpu_avg"]["mean"] / base
                                         for s in schemes if s != "ospf" and base > 0}
    if scenario == "high-demand":
        burst = {s: [float(r["pdr"]) for r in metrics
                     if r["scheme"] == s and events.get((int(r["slot"]), s))] for s in schemes}
        head["min_burst_pdr"] = {s: min(v) if v else None for s, v in burst.items()}
        head["mean_burst_pdr"] = {s: float(np.mean(v)) if v else None for s, v in burst.items()}
        head["burst_pdr_at_least_0.90_share"] = {
            s: (sum(p >= 0.90 for p in v) / len(v)) if v else None for s, v in burst.items()}
    if scenario == "urgent-flow":
        rows = [r for r in decisions if r["scheme"] == "flexalgo" and r["event_slot"] == "1"
                and r["bulk_latency_ms"] and r["urgent_latency_ms"]]
        head["urgent_latency_delta_ms"] = (
            float(np.mean([float(r["bulk_latency_ms"]) for r in rows])
                  - np.mean([float(r["urgent_latency_ms"]) for r in rows])) if rows else None)
    solve = [float(r["solve_time_s"]) for r in decisions if r["scheme"] == "flexalgo"]
    if solve:
        head["flexalgo_solve_time_s"] = {"median": float(np.median(solve)),
                                         "p95": float(np.percentile(solve, 95)), "max": max(solve)}
    return {"scenario": scenario, "slots": len({r["slot"] for r in metrics}), "schemes": per, "headline": head}


def write_outputs(config: RunConfig, result: RunResult) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(metrics_csv(result.records))
    (out / "decisions.csv").write_text(decisions_csv(result.decisions))
    (out / "config.resolved.yaml").write_text(yaml.safe_dump(config.to_dict(), sort_keys=False))
    _write_derived(out, metrics_rows(result.records), result.summary)
    return out


def _write_derived(out: Path, metrics: Sequence[Mapping[str, str]], summary: dict) -> None:
    for scheme in dict.fromkeys(r["scheme"] for r in metrics):
        for m in METRICS:
            (out / f"cdf_{m}_{scheme}.csv").write_text(cdf_csv(export_cdf(metrics, m, scheme)))
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def export_run(run_dir: str | os.PathLike) -> dict:
    """Re-derive CDFs and the summary of an existing run directory from its ledgers."""
    out = Path(run_dir)
    metrics = read_csv(out / "metrics.csv")
    decisions = read_csv(out / "decisions.csv")
    scenario = "default"
    echo = out / "config.resolved.yaml"
    if echo.exists():
        scenario = (yaml.safe_load(echo.read_text()) or {}).get("scenario", {}).get("name", scenario)
    summary = summarize(metrics, decisions, scenario)
    _write_derived(out, metrics, summary)
    return summary
