"""Exhaustive reference solver for small instances (verification only)."""
from __future__ import annotations

import itertools
import math
import time

from .model import MilpInstance, assignment_from_paths, reliability_penalty
from .solver import INFEASIBLE, OPTIMAL, MilpSolution

MAX_NODES = 12
MAX_DEMANDS = 3


class OracleScopeError(ValueError):
    pass


def simple_paths(model: MilpInstance, k: int) -> list[tuple[int, ...]]:
    """All simple paths of demand ``k`` that never relay through a ground station."""
    dem = model.demands[k]
    adj: dict[int, list[int]] = {}
    for i, j in model.links:
        adj.setdefault(i, []).append(j)
        adj.setdefault(j, []).append(i)
    for v in adj:
        adj[v].sort()
    out: list[tuple[int, ...]] = []
    stack = [(dem.source, (dem.source,))]
    while stack:
        v, path = stack.pop()
        if v == dem.destination:
            out.append(path)
            continue
        if v != dem.source and not model.is_satellite(v):
            continue
        for w in reversed(adj.get(v, [])):
            if w in path:
                continue
            if not model.is_satellite(w) and w != dem.destination:
                continue
            stack.append((w, path + (w,)))
    return sorted(out)


def oracle_solve(model: MilpInstance) -> MilpSolution:
    """Global optimum by enumerating every combination of simple paths."""
    n_nodes = len(model.satellites) + len(model.stations)
    if n_nodes > MAX_NODES or len(model.demands) > MAX_DEMANDS:
        raise OracleScopeError(f"{n_nodes} nodes / {len(model.demands)} demands exceeds oracle bound")
    t0 = time.perf_counter()
    if not model.demands:
        return MilpSolution(OPTIMAL, 0.0, {}, assignment_from_paths(model, {}), time.perf_counter() - t0)

    alpha, beta, gamma = model.weights
    T = model.limits.node_delay_ms
    link_idx = {key: n for n, key in enumerate(model.links)}
    power = model.power
    p_lim = model.limits.power_limit

    candidates = []
    for k, dem in enumerate(model.demands):
        rows = []
        for path in simple_paths(model, k):
            sats = frozenset(v for v in path if model.is_satellite(v))
            if any(power.get(s, 0.0) > p_lim for s in sats):
                continue  # peak power can never hold for this path
            dirs = [(link_idx[(min(a, b), max(a, b))], a < b) for a, b in zip(path, path[1:])]
            hops = [l for l, _ in dirs]
            cost = (beta * sum(reliability_penalty(model.reliability[h]) for h in hops)
                    + gamma * (sum(model.delay_ms[h] for h in hops) + T * len(sats)))
            # simple paths give every satellite in + out <= 2, inside the degree bound
            rows.append((path, sats, dirs, cost, dem.bandwidth_mbps))
        candidates.append(rows)

    best_val, best = math.inf, None
    shared = model.limits.shared_capacity
    for combo in itertools.product(*candidates):
        load: dict = {}
        ok = True
        for path, sats, dirs, cost, bw in combo:
            for l, fwd in dirs:
                key = l if shared else (l, fwd)
                load[key] = load.get(key, 0.0) + bw
                cap = model.capacity_mbps[l]
                if load[key] > cap + 1e-9:
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            continue
        active = frozenset().union(*(c[1] for c in combo))
        val = alpha * sum(power.get(s, 0.0) for s in active) + sum(c[3] for c in combo)
        if val < best_val - 1e-12:
            best_val, best = val, combo
    if best is None:
        return MilpSolution(INFEASIBLE, math.inf, solve_time=time.perf_counter() - t0)
    paths = {k: c[0] for k, c in enumerate(best)}
    return MilpSolution(OPTIMAL, best_val, paths, assignment_from_paths(model, paths),
                        time.perf_counter() - t0)
