"""Per-slot routing decisions for the slice controller and the three baselines.

``ospf``      delay-metric shortest path, destination-based forwarding tables
              rebuilt on every satellite at every topology update.
``srv6``      the same path, source routed with one SID per hop.
``green``     the energy-weighted MILP only, compressed SIDs.
``flexalgo``  three MILPs per slot (energy, reliability, latency weightings);
              the slice policy picks one solution per demand class.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .constellation import TopologySnapshot
from .linkstate import (ENERGY, LATENCY, LOW_RELY, RELIABILITY, SLICES, LinkState, SliceConfig,
                        SlicePath, SliceRouter, build_sid_stack)
from .milp import INFEASIBLE, MilpInstance, MilpLimits, MilpSolution, build_model, solve
from .trafficlab import DEFAULT, HIGH_DEMAND, URGENT, CpuModel, Demand

log = logging.getLogger(__name__)

# Default IGP metric of the legacy schemes: propagation delay only.
IGP_DELAY = SliceConfig(0, "delay", (0.0, 0.0, 1.0), node_delay_ms=0.0)
CLASS_PRIORITY = (URGENT, HIGH_DEMAND, DEFAULT)
FALLBACK_ORDER = {130: (130, 129, 128), 129: (129, 130, 128), 128: (128, 130, 129)}


class StaleRouteError(RuntimeError):
    """An installed route uses a link that no longer exists."""


@dataclass(frozen=True)
class SlicePolicy:
    utilization_threshold: float = 0.9
    release_after_calm_slots: int = 2


@dataclass(frozen=True)
class Observations:
    demand_class: str
    path_utilization: float = 0.0
    burst: bool = False
    current_slice: int = 130
    calm_streak: int = 0


def select_slice(policy: SlicePolicy, obs: Observations) -> int:
    if obs.demand_class == URGENT:
        return 128
    if obs.burst or obs.path_utilization >= policy.utilization_threshold:
        return 129
    if obs.current_slice == 129 and obs.calm_streak < policy.release_after_calm_slots:
        return 129
    return 130


@dataclass(frozen=True)
class SchemeState:
    scheme: str
    installed_routes: Mapping[int, SlicePath] = field(default_factory=dict)
    active_slice: int | None = None
    bulk_slice: int = 130
    calm_streak: int = 0
    last_solve_time_s: float = 0.0


def initial_state(scheme: str) -> SchemeState:
    return SchemeState(scheme, active_slice=130 if scheme == "flexalgo" else None)


@dataclass(frozen=True)
class ControllerConfig:
    policy: SlicePolicy = SlicePolicy()
    limits: MilpLimits = MilpLimits()
    cpu: CpuModel = CpuModel()
    solver_budget_s: float = 10.0
    solver_method: str = "highs"
    base_load_mbps: float = 20.0


def entry_nodes(scheme: str, route: SlicePath | None, is_satellite) -> set[int]:
    """Satellites holding forwarding state for ``route`` under ``scheme``."""
    if route is None or scheme == "ospf":
        return set()
    if scheme == "srv6":
        return {v for v in route.node_sequence if is_satellite(v)}
    return {v for v in route.sid_stack if is_satellite(v)}


def install_routes(state: SchemeState, routes: Mapping[int, SlicePath | None],
                   snapshot: TopologySnapshot) -> tuple[SchemeState, dict[int, int]]:
    """Program changed routes; returns the new state and control events per node."""
    links = snapshot.link_map()
    for dem_id, route in routes.items():
        if route is None:
            continue
        for a, b in zip(route.node_sequence, route.node_sequence[1:]):
            if ((a, b) if a < b else (b, a)) not in links:
                raise StaleRouteError(f"demand {dem_id} route uses vanished link {(a, b)}")
    events: dict[int, int] = {}
    for dem_id, new in routes.items():
        old = state.installed_routes.get(dem_id)
        if new is None or (old is not None and old.node_sequence == new.node_sequence
                           and old.sid_stack == new.sid_stack):
            continue
        src = new.node_sequence[0]
        events[src] = events.get(src, 0) + 1
        fresh = entry_nodes(state.scheme, new, snapshot.is_satellite) - entry_nodes(
            state.scheme, old, snapshot.is_satellite)
        for v in fresh:
            events[v] = events.get(v, 0) + 1
    installed = {k: v for k, v in routes.items() if v is not None}
    return replace(state, installed_routes=installed), events


@dataclass(frozen=True)
class StepResult:
    routes: dict[int, SlicePath | None]
    state: SchemeState
    control_events: dict[int, int]
    solve_time_s: float = 0.0
    solutions: dict[int, tuple[MilpInstance, MilpSolution]] = field(default_factory=dict)
    slice_delays: dict[int, float] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()


class SolveCache:
    """Shares identical state-independent models between schemes within a slot."""

    def __init__(self):
        self._slot = None
        self._store: dict = {}

    def get(self, slot: int, key, build, budget: float, method: str):
        if slot != self._slot:
            self._slot, self._store = slot, {}
        if key not in self._store:
            model = build()
            self._store[key] = (model, solve(model, budget, method=method, tie_break=True))
        return self._store[key]


def _demand_key(demands: Sequence[Demand]):
    return tuple((d.id, d.source, d.destination, d.bandwidth_mbps) for d in demands)


def _path_utilization(route: SlicePath | None, states: Mapping[tuple[int, int], LinkState]) -> float:
    if route is None:
        return 0.0
    worst = 0.0
    nodes = route.node_sequence
    for a, b in zip(nodes, nodes[1:]):
        st = states.get((a, b) if a < b else (b, a))
        if st is not None:
            worst = max(worst, st.utilization)
    return worst


def step(slot: int, snapshot: TopologySnapshot, states: Mapping[tuple[int, int], LinkState],
         demands: Sequence[Demand], scheme_state: SchemeState,
         config: ControllerConfig = ControllerConfig(), cache: SolveCache | None = None) -> StepResult:
    """Compute, select and install this slot's routes for one scheme."""
    scheme = scheme_state.scheme
    if scheme in ("ospf", "srv6"):
        return _step_shortest(snapshot, demands, scheme_state)
    cache = cache or SolveCache()
    power = config.cpu.node_power(snapshot, scheme, config.base_load_mbps)
    p_lim = config.limits.power_limit
    routers = {algo: SliceRouter(snapshot, states, SLICES[algo], power, power_limit=p_lim)
               for algo in ((130,) if scheme == "green" else (130, 129, 128))}

    def stateless(weights):
        key = ("w", weights, _demand_key(demands), config.limits, power.tobytes())
        return cache.get(slot, key, lambda: build_model(snapshot, None, demands, weights, config.limits,
                                                         node_power=power),
                         config.solver_budget_s, config.solver_method)

    warnings: list[str] = []
    if scheme == "green":
        model, sol = stateless(ENERGY.weights)
        routes = {}
        for k, d in enumerate(demands):
            if sol.status == INFEASIBLE:
                warnings.append(f"slot {slot}: green model infeasible, demand {d.id} unrouted")
                routes[d.id] = None
            else:
                routes[d.id] = routers[130].slice_path(sol.paths[k])
        new_state, events = install_routes(scheme_state, routes, snapshot)
        new_state = replace(new_state, last_solve_time_s=sol.solve_time)
        return StepResult(routes, new_state, events, sol.solve_time, {130: (model, sol)},
                          warnings=tuple(warnings))

    sols = {130: stateless(ENERGY.weights), 128: stateless(LATENCY.weights)}
    low_rely = [key for key, st in states.items() if LOW_RELY in st.affinity_tags]
    rel_model = build_model(snapshot, states, demands, RELIABILITY.weights, config.limits,
                            node_power=power, exclude=low_rely)
    sols[129] = (rel_model, solve(rel_model, config.solver_budget_s, method=config.solver_method,
                                  tie_break=True))
    solve_time = sum(s.solve_time for _, s in sols.values())

    burst = any(d.cls == HIGH_DEMAND or d.bandwidth_mbps > config.base_load_mbps + 1e-9
                for d in demands)
    util = max((_path_utilization(scheme_state.installed_routes.get(d.id), states)
                for d in demands if d.cls != URGENT), default=0.0)
    congested = burst or util >= config.policy.utilization_threshold
    streak = 0 if congested else scheme_state.calm_streak + 1
    bulk = select_slice(config.policy, Observations(DEFAULT, util, burst, scheme_state.bulk_slice, streak))

    routes: dict[int, SlicePath | None] = {}
    for k, d in enumerate(demands):
        want = select_slice(config.policy, Observations(d.cls, util, burst, bulk, streak)) \
            if d.cls == URGENT else bulk
        routes[d.id] = None
        for algo in FALLBACK_ORDER[want]:
            sol = sols[algo][1]
            if sol.status != INFEASIBLE:
                if algo != want:
                    warnings.append(f"slot {slot}: slice {want} infeasible, demand {d.id} on {algo}")
                routes[d.id] = routers[algo].slice_path(sol.paths[k])
                break
        else:
            warnings.append(f"slot {slot}: every slice infeasible, demand {d.id} unrouted")
    for w in warnings:
        log.warning(w)

    present = {d.cls for d in demands}
    top = next((c for c in CLASS_PRIORITY if c in present), DEFAULT)
    active = 128 if top == URGENT else bulk
    new_state, events = install_routes(scheme_state, routes, snapshot)
    new_state = replace(new_state, active_slice=active, bulk_slice=bulk, calm_streak=streak,
                        last_solve_time_s=solve_time)

    delays = {}
    if demands:
        src, dst = demands[0].source, demands[0].destination
        for algo, router in routers.items():
            nodes = router.shortest_path(src, dst)
            if nodes is not None:
                delays[algo] = router.slice_path(nodes).total_delay_ms
    return StepResult(routes, new_state, events, solve_time, sols, delays, tuple(warnings))


def _step_shortest(snapshot: TopologySnapshot, demands: Sequence[Demand],
                   scheme_state: SchemeState) -> StepResult:
    router = SliceRouter(snapshot, None, IGP_DELAY)
    routes: dict[int, SlicePath | None] = {}
    warnings = []
    for d in demands:
        nodes = router.shortest_path(d.source, d.destination)
        if nodes is None:
            warnings.append(f"slot {snapshot.slot_index}: no path for demand {d.id}")
            routes[d.id] = None
            continue
        path = router.slice_path(nodes)
        if scheme_state.scheme == "srv6":
            path = replace(path, sid_stack=build_sid_stack(nodes))
        routes[d.id] = path
    new_state, events = install_routes(scheme_state, routes, snapshot)
    return StepResult(routes, new_state, events, warnings=tuple(warnings))
