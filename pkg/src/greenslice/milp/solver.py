"""Exact solution of :class:`MilpInstance` models.

Two interchangeable backends sit behind :func:`solve`:

``"highs"``
    scipy's HiGHS MILP driver (default, fast at constellation scale).
``"bnb"``
    an in-module branch and bound: LP relaxations via ``scipy.optimize.linprog``,
    most-fractional branching, best-bound node selection with FIFO ties.

Whatever the backend, the raw 0/1 vector is cleaned into one simple path per
demand (zero-cost detached cycles are dropped, ``y``/``z`` recomputed from
the paths) and the objective is re-evaluated on the cleaned solution.
"""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .model import Assignment, MilpInstance, assignment_from_paths, evaluate_objective

OPTIMAL = "optimal"
INCUMBENT = "incumbent"
INFEASIBLE = "infeasible"

REL_GAP = 1e-7
INT_TOL = 1e-6


class SolverBudgetError(RuntimeError):
    """No feasible solution found inside the time budget."""


@dataclass(frozen=True)
class MilpSolution:
    status: str
    objective: float
    paths: dict[int, tuple[int, ...]] = field(default_factory=dict)
    assignment: Assignment | None = None
    solve_time: float = 0.0
    gap: float = 0.0
    nodes_explored: int = 0

    @property
    def x(self):
        return self.assignment.x if self.assignment else {}

    @property
    def y(self):
        return self.assignment.y if self.assignment else {}

    @property
    def z(self):
        return self.assignment.z if self.assignment else {}

    def arc_set(self, k: int) -> frozenset[tuple[int, int]]:
        nodes = self.paths.get(k, ())
        return frozenset(zip(nodes, nodes[1:]))

    def records(self, model: MilpInstance) -> list[dict]:
        return [
            {"demand": d.id, "source": d.source, "destination": d.destination,
             "bandwidth_mbps": d.bandwidth_mbps, "path": list(self.paths.get(k, ())),
             "status": self.status, "objective": self.objective}
            for k, d in enumerate(model.demands)
        ]


def extract_paths(model: MilpInstance, values: np.ndarray) -> dict[int, tuple[int, ...]]:
    """One loop-erased source-to-destination path per demand."""
    paths = {}
    for k, dem in enumerate(model.demands):
        succ: dict[int, list[int]] = {}
        for a, (u, v) in enumerate(model.arcs):
            if values[model.x_index(k, a)] > 0.5:
                succ.setdefault(u, []).append(v)
        for u in succ:
            succ[u].sort(reverse=True)
        walk = [dem.source]
        cur = dem.source
        while cur != dem.destination:
            nxt_list = succ.get(cur)
            if not nxt_list:
                raise RuntimeError(f"demand {k}: broken flow at node {cur}")
            cur = nxt_list.pop()
            walk.append(cur)
        # loop erasure
        path: list[int] = []
        where: dict[int, int] = {}
        for v in walk:
            if v in where:
                cut = where[v]
                for dropped in path[cut + 1:]:
                    del where[dropped]
                path = path[: cut + 1]
            else:
                where[v] = len(path)
                path.append(v)
        paths[k] = tuple(path)
    return paths


def _finish(model: MilpInstance, values: np.ndarray, status: str, t0: float,
            gap: float = 0.0, nodes: int = 0) -> MilpSolution:
    paths = extract_paths(model, values)
    assignment = assignment_from_paths(model, paths)
    return MilpSolution(status, evaluate_objective(model, assignment), paths, assignment,
                        time.perf_counter() - t0, gap, nodes)


def _infeasible(t0: float, nodes: int = 0) -> MilpSolution:
    return MilpSolution(INFEASIBLE, math.inf, solve_time=time.perf_counter() - t0, nodes_explored=nodes)


def _highs(c, A_eq, b_eq, A_ub, b_ub, ub, budget):
    cons = []
    if A_eq.shape[0]:
        cons.append(LinearConstraint(A_eq, b_eq, b_eq))
    if A_ub.shape[0]:
        cons.append(LinearConstraint(A_ub, -np.inf, b_ub))
    res = milp(c, constraints=cons, integrality=np.ones_like(c), bounds=Bounds(np.zeros_like(ub), ub),
               options={"time_limit": budget, "mip_rel_gap": REL_GAP, "presolve": True})
    if res.x is None:
        if res.status == 2:
            return INFEASIBLE, None, math.inf
        raise SolverBudgetError(f"HiGHS stopped without a solution: {res.message}")
    x = np.round(res.x)
    status = OPTIMAL if res.status == 0 else INCUMBENT
    return status, x, float(getattr(res, "mip_gap", 0.0) or 0.0)


class _BranchAndBound:
    def __init__(self, c, A_eq, b_eq, A_ub, b_ub, ub, deadline):
        self.c = c
        self.A_eq, self.b_eq = A_eq, b_eq
        self.A_ub, self.b_ub = A_ub, b_ub
        self.ub = ub
        self.deadline = deadline
        self.nodes = 0

    def relax(self, lo, hi):
        res = linprog(self.c, A_ub=self.A_ub if self.A_ub.shape[0] else None,
                      b_ub=self.b_ub if self.A_ub.shape[0] else None,
                      A_eq=self.A_eq if self.A_eq.shape[0] else None,
                      b_eq=self.b_eq if self.A_eq.shape[0] else None,
                      bounds=np.column_stack([lo, hi]), method="highs-ds")
        self.nodes += 1
        if res.status != 0:
            return None, math.inf
        return res.x, float(res.fun)

    @staticmethod
    def _cutoff(best_val: float) -> float:
        if math.isinf(best_val):
            return math.inf
        return best_val - REL_GAP * max(1.0, abs(best_val))

    def run(self):
        lo = np.zeros_like(self.ub)
        hi = self.ub.copy()
        best_x, best_val = None, math.inf
        x, bound = self.relax(lo, hi)
        if x is None:
            return INFEASIBLE, None, math.inf, 0.0
        seq = 0
        heap = [(bound, seq, lo, hi, x)]
        timed_out = False
        while heap:
            bound, _, lo, hi, x = heapq.heappop(heap)
            if bound >= self._cutoff(best_val):
                continue
            if time.perf_counter() > self.deadline:
                heapq.heappush(heap, (bound, -1, lo, hi, x))
                timed_out = True
                break
            frac = np.abs(x - np.round(x))
            j = int(np.argmax(frac))
            if frac[j] <= INT_TOL:
                best_x, best_val = np.round(x), bound
                continue
            for fix in (1.0, 0.0):
                clo, chi = lo.copy(), hi.copy()
                clo[j] = chi[j] = fix
                cx, cb = self.relax(clo, chi)
                if cx is not None and cb < self._cutoff(best_val):
                    seq += 1
                    heapq.heappush(heap, (cb, seq, clo, chi, cx))
        if best_x is None:
            if timed_out:
                raise SolverBudgetError("branch and bound ran out of time before any incumbent")
            return INFEASIBLE, None, math.inf, 0.0
        if timed_out and heap:
            low = min(h[0] for h in heap)
            gap = (best_val - low) / max(1e-12, abs(best_val))
            if gap > REL_GAP:
                return INCUMBENT, best_x, best_val, gap
        return OPTIMAL, best_x, best_val, 0.0


def _run_backend(method, c, A_eq, b_eq, A_ub, b_ub, ub, budget, deadline):
    if method == "highs":
        status, x, gap = _highs(c, A_eq, b_eq, A_ub, b_ub, ub, max(budget, 1e-3))
        return status, x, gap, 1
    if method == "bnb":
        bb = _BranchAndBound(c, A_eq, b_eq, A_ub, b_ub, ub, deadline)
        status, x, _, gap = bb.run()
        return status, x, gap, bb.nodes
    raise ValueError(f"unknown method {method!r}")


def solve(model: MilpInstance, time_budget_s: float = 10.0, *, method: str = "highs",
          tie_break: bool = False) -> MilpSolution:
    """Globally optimal (or best-within-budget) routing for ``model``.

    With ``tie_break`` a second pass keeps the optimal objective value and
    minimises end-to-end latency among the optimal solutions, which makes
    degenerate objectives (e.g. all reliabilities equal to 1) pick short paths.
    """
    if not time_budget_s > 0:
        raise ValueError("time budget must be positive")
    t0 = time.perf_counter()
    deadline = t0 + time_budget_s
    if not model.demands:
        return _finish(model, np.zeros(model.n_vars), OPTIMAL, t0)
    c = model.objective_vector()
    A_eq, b_eq, A_ub, b_ub = model.constraints()
    ub = model.upper_bounds()
    status, x, gap, nodes = _run_backend(method, c, A_eq, b_eq, A_ub, b_ub, ub, time_budget_s, deadline)
    if status == INFEASIBLE:
        return _infeasible(t0, nodes)
    alpha, beta, _ = model.weights
    if tie_break and (alpha > 0 or beta > 0) and status == OPTIMAL:
        x, n2 = _latency_tie_break(model, method, c, x, A_eq, b_eq, A_ub, b_ub, ub, deadline)
        nodes += n2
    return _finish(model, x, status, t0, gap, nodes)


def _walk_costs(adj, start):
    dist = {start: 0.0}
    heap = [(0.0, start)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, w in adj.get(u, ()):
            nd = d + w
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def prune_arcs(model: MilpInstance, c: np.ndarray, ub: np.ndarray, bound: float) -> np.ndarray:
    """Fix to zero every ``x[k, a]`` that cannot appear in a solution costing <= ``bound``.

    Any solution routing demand k over arc (u, v) costs at least the cheapest
    source -> u -> v -> destination walk for k alone, counting arc costs and the
    per-satellite ``y``/``z`` costs, because the objective's other terms are
    non-negative.  Arcs whose walk bound exceeds ``bound`` are dropped.
    """
    ub = ub.copy()
    K, S, A = len(model.demands), len(model.satellites), model.n_arcs
    z_cost = c[K * A + K * S:]
    for k, dem in enumerate(model.demands):
        node_cost = {s: z_cost[p] + c[K * A + k * S + p] for p, s in enumerate(model.satellites)}
        fwd, bwd, arcs = {}, {}, []
        for a, (u, v) in enumerate(model.arcs):
            i = model.x_index(k, a)
            if ub[i] <= 0:
                continue
            w = c[i] + node_cost.get(v, 0.0)
            fwd.setdefault(u, []).append((v, w))
            bwd.setdefault(v, []).append((u, w))
            arcs.append((i, u, v, w))
        ds, dd = _walk_costs(fwd, dem.source), _walk_costs(bwd, dem.destination)
        for i, u, v, w in arcs:
            if ds.get(u, math.inf) + w + dd.get(v, math.inf) > bound:
                ub[i] = 0.0
    return ub


def _latency_tie_break(model, method, c, x, A_eq, b_eq, A_ub, b_ub, ub, deadline):
    """Lowest-latency solution among those matching ``x``'s objective.

    The objective is capped at its optimum and latency minimised.  Arcs that
    cannot be part of any solution under the cap are fixed to zero first,
    which keeps this pass cheap.
    """
    best = float(c @ x)
    tol = 1e-7 * max(1.0, abs(best))
    lat = model.latency_vector()
    lat_x = float(lat @ x)
    if lat_x <= 0:
        return x, 0
    ub = prune_arcs(model, c, ub, best + tol)
    A2 = sp.vstack([A_ub, sp.csr_matrix(c.reshape(1, -1))]).tocsr()
    cap = best + 1e-9 * max(1.0, abs(best))
    left = max(deadline - time.perf_counter(), 1e-3)
    try:
        s2, x2, _, nodes = _run_backend(method, lat, A_eq, b_eq, A2, np.append(b_ub, cap), ub,
                                        left, time.perf_counter() + left)
    except SolverBudgetError:
        return x, 0
    if s2 != INFEASIBLE and float(c @ x2) <= best + tol and float(lat @ x2) <= lat_x:
        return x2, nodes
    return x, nodes
