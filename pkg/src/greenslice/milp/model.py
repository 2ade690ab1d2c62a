"""The unified energy / reliability / latency routing MILP.

Variables, in vector order::

    x[k, a]   arc a (a directed half of a physical link) carries demand k
    y[k, s]   satellite s lies on demand k's path
    z[s]      satellite s is activated by any demand

Objective::

    alpha * sum_s p_s z_s
  + beta  * sum_a -log(R_a) sum_k x[k, a]
  + gamma * (sum_a d_a sum_k x[k, a] + T_node sum_s sum_k y[k, s])

Ground stations never relay: an arc may leave a ground station only if it is
the demand's source and enter one only if it is the destination.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

DEGREE_LIMIT = 4
RELIABILITY_FLOOR = 1e-13
RELIABILITY_PENALTY_CAP = 30.0


class ModelError(ValueError):
    """The instance cannot be built as requested."""


class EvaluationError(KeyError):
    """An assignment is missing a variable."""


@dataclass(frozen=True)
class Commodity:
    id: int
    source: int
    destination: int
    bandwidth_mbps: float


@dataclass(frozen=True)
class MilpLimits:
    power_limit: float = 32.0
    node_delay_ms: float = 10.0
    shared_capacity: bool = True


def reliability_penalty(r: float) -> float:
    return min(-math.log(max(r, RELIABILITY_FLOOR)), RELIABILITY_PENALTY_CAP)


@dataclass(frozen=True, eq=False)
class MilpInstance:
    satellites: tuple[int, ...]
    stations: tuple[int, ...]
    power: Mapping[int, float]
    links: tuple[tuple[int, int], ...]
    delay_ms: tuple[float, ...]
    capacity_mbps: tuple[float, ...]
    reliability: tuple[float, ...]
    demands: tuple[Commodity, ...]
    weights: tuple[float, float, float]
    limits: MilpLimits = MilpLimits()
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.validate()
        sat_pos = {s: n for n, s in enumerate(self.satellites)}
        arcs = []
        for i, j in self.links:
            arcs.append((i, j))
            arcs.append((j, i))
        object.__setattr__(self, "_index", {"sat": sat_pos, "arcs": tuple(arcs)})

    def validate(self) -> None:
        a, b, g = self.weights
        if min(a, b, g) < 0 or a + b + g == 0:
            raise ModelError(f"weights must be non-negative and not all zero: {self.weights}")
        nodes = set(self.satellites) | set(self.stations)
        if len(nodes) != len(self.satellites) + len(self.stations):
            raise ModelError("satellite and station ids overlap")
        if not (len(self.links) == len(self.delay_ms) == len(self.capacity_mbps) == len(self.reliability)):
            raise ModelError("link attribute lengths differ")
        seen = set()
        for (i, j), c, r in zip(self.links, self.capacity_mbps, self.reliability):
            if i not in nodes or j not in nodes or i == j:
                raise ModelError(f"bad link {(i, j)}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ModelError(f"duplicate link {key}")
            seen.add(key)
            if not c > 0:
                raise ModelError(f"link {(i, j)} capacity must be > 0")
            if not 0 < r <= 1:
                raise ModelError(f"link {(i, j)} reliability {r} outside (0, 1]")
        stations = set(self.stations)
        for d in self.demands:
            if not d.bandwidth_mbps > 0:
                raise ModelError(f"demand {d.id}: bandwidth must be > 0")
            if d.source == d.destination:
                raise ModelError(f"demand {d.id}: source equals destination")
            if d.source not in stations or d.destination not in stations:
                raise ModelError(f"demand {d.id}: endpoints must be ground stations in the model")
        for s in self.satellites:
            if self.power.get(s, 0.0) < 0:
                raise ModelError(f"satellite {s}: negative power")

    # -- indexing -----------------------------------------------------------
    @property
    def arcs(self) -> tuple[tuple[int, int], ...]:
        return self._index["arcs"]

    @property
    def n_arcs(self) -> int:
        return 2 * len(self.links)

    @property
    def n_vars(self) -> int:
        K, S = len(self.demands), len(self.satellites)
        return self.n_arcs * K + S * K + S

    def x_index(self, k: int, a: int) -> int:
        return k * self.n_arcs + a

    def y_index(self, k: int, s_pos: int) -> int:
        return len(self.demands) * self.n_arcs + k * len(self.satellites) + s_pos

    def z_index(self, s_pos: int) -> int:
        K, S = len(self.demands), len(self.satellites)
        return K * self.n_arcs + K * S + s_pos

    def sat_pos(self, node: int) -> int | None:
        return self._index["sat"].get(node)

    def is_satellite(self, node: int) -> bool:
        return node in self._index["sat"]

    def arc_allowed(self, k: int, a: int) -> bool:
        u, v = self.arcs[a]
        d = self.demands[k]
        return (self.is_satellite(u) or u == d.source) and (self.is_satellite(v) or v == d.destination)

    def variable_names(self) -> list[str]:
        names = []
        for k in range(len(self.demands)):
            names += [f"x_{k}_{u}_{v}" for u, v in self.arcs]
        for k in range(len(self.demands)):
            names += [f"y_{k}_{s}" for s in self.satellites]
        names += [f"z_{s}" for s in self.satellites]
        return names

    # -- coefficient vectors -------------------------------------------------
    def arc_costs(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-arc reliability penalty and delay (both directions of a link equal)."""
        pen = np.repeat([reliability_penalty(r) for r in self.reliability], 2)
        delay = np.repeat(np.asarray(self.delay_ms, dtype=float), 2)
        return pen, delay

    def objective_vector(self, weights: Sequence[float] | None = None) -> np.ndarray:
        alpha, beta, gamma = self.weights if weights is None else weights
        K, S = len(self.demands), len(self.satellites)
        pen, delay = self.arc_costs()
        c = np.zeros(self.n_vars)
        c[: K * self.n_arcs] = np.tile(beta * pen + gamma * delay, K)
        c[K * self.n_arcs: K * self.n_arcs + K * S] = gamma * self.limits.node_delay_ms
        c[K * self.n_arcs + K * S:] = alpha * np.array([self.power.get(s, 0.0) for s in self.satellites])
        return c

    def latency_vector(self) -> np.ndarray:
        return self.objective_vector((0.0, 0.0, 1.0))

    def upper_bounds(self) -> np.ndarray:
        ub = np.ones(self.n_vars)
        for k in range(len(self.demands)):
            for a in range(self.n_arcs):
                if not self.arc_allowed(k, a):
                    ub[self.x_index(k, a)] = 0.0
        return ub

    def constraints(self, cuts: bool = True) -> tuple[sp.csr_matrix, np.ndarray, sp.csr_matrix, np.ndarray]:
        """``(A_eq, b_eq, A_ub, b_ub)`` for flow, degree, capacity, power, coupling, activation.

        ``cuts`` appends per-satellite visit inequalities that every simple-path
        solution satisfies; they leave the optimum unchanged but make the LP
        relaxation much tighter.
        """
        K, S, A = len(self.demands), len(self.satellites), self.n_arcs
        nodes = list(self.satellites) + list(self.stations)
        node_row = {v: n for n, v in enumerate(nodes)}
        arcs = self.arcs

        eq_r, eq_c, eq_v, b_eq = [], [], [], []
        for k, dem in enumerate(self.demands):
            base = k * len(nodes)
            for a, (u, v) in enumerate(arcs):
                col = self.x_index(k, a)
                eq_r += [base + node_row[u], base + node_row[v]]
                eq_c += [col, col]
                eq_v += [1.0, -1.0]
            rhs = np.zeros(len(nodes))
            rhs[node_row[dem.source]] = 1.0
            rhs[node_row[dem.destination]] = -1.0
            b_eq.append(rhs)
        A_eq = sp.csr_matrix((eq_v, (eq_r, eq_c)), shape=(K * len(nodes), self.n_vars))
        b_eq = np.concatenate(b_eq) if b_eq else np.zeros(0)

        ub_r, ub_c, ub_v, b_ub = [], [], [], []
        row = 0

        def add(cols, vals, rhs):
            nonlocal row
            ub_r.extend([row] * len(cols))
            ub_c.extend(cols)
            ub_v.extend(vals)
            b_ub.append(rhs)
            row += 1

        # degree: in + out <= 4 per satellite and demand
        for k in range(K):
            incident: dict[int, list[int]] = {s: [] for s in self.satellites}
            for a, (u, v) in enumerate(arcs):
                for node in (u, v):
                    if node in incident:
                        incident[node].append(self.x_index(k, a))
            for s in self.satellites:
                if incident[s]:
                    add(incident[s], [1.0] * len(incident[s]), float(DEGREE_LIMIT))
        # capacity
        for l_idx, cap in enumerate(self.capacity_mbps):
            dirs = (2 * l_idx, 2 * l_idx + 1)
            groups = [dirs] if self.limits.shared_capacity else [(dirs[0],), (dirs[1],)]
            for grp in groups:
                cols, vals = [], []
                for k, dem in enumerate(self.demands):
                    for a in grp:
                        cols.append(self.x_index(k, a))
                        vals.append(dem.bandwidth_mbps)
                if cols:
                    add(cols, vals, float(cap))
        # peak power
        for s_pos, s in enumerate(self.satellites):
            add([self.z_index(s_pos)], [self.power.get(s, 0.0)], self.limits.power_limit)
        # link-node coupling
        for k in range(K):
            for a, (u, v) in enumerate(arcs):
                for node in (u, v):
                    pos = self.sat_pos(node)
                    if pos is not None:
                        add([self.x_index(k, a), self.y_index(k, pos)], [1.0, -1.0], 0.0)
        # visit cuts: a simple path enters and leaves a satellite at most once,
        # so the flow through it is bounded by y (valid, tightens the relaxation)
        if cuts:
            for k in range(K):
                out_cols: dict[int, list[int]] = {}
                in_cols: dict[int, list[int]] = {}
                for a, (u, v) in enumerate(arcs):
                    if self.sat_pos(u) is not None:
                        out_cols.setdefault(self.sat_pos(u), []).append(self.x_index(k, a))
                    if self.sat_pos(v) is not None:
                        in_cols.setdefault(self.sat_pos(v), []).append(self.x_index(k, a))
                for group in (out_cols, in_cols):
                    for pos, cols in sorted(group.items()):
                        add(cols + [self.y_index(k, pos)], [1.0] * len(cols) + [-1.0], 0.0)
        # activation: y <= z
        for k in range(K):
            for s_pos in range(S):
                add([self.y_index(k, s_pos), self.z_index(s_pos)], [1.0, -1.0], 0.0)

        A_ub = sp.csr_matrix((ub_v, (ub_r, ub_c)), shape=(row, self.n_vars))
        return A_eq, b_eq, A_ub, np.asarray(b_ub, dtype=float)


def build_instance(*, satellites: Iterable[int], stations: Iterable[int],
                   power: Mapping[int, float], links: Mapping[tuple[int, int], Mapping[str, float]],
                   demands: Iterable[Commodity], weights: Sequence[float],
                   limits: MilpLimits = MilpLimits()) -> MilpInstance:
    """Assemble an instance from plain mappings (used for hand-built graphs)."""
    keys = sorted((min(i, j), max(i, j)) for i, j in links)
    attrs = {(min(i, j), max(i, j)): v for (i, j), v in links.items()}
    return MilpInstance(
        satellites=tuple(sorted(satellites)), stations=tuple(sorted(stations)),
        power=dict(power), links=tuple(keys),
        delay_ms=tuple(float(attrs[k]["delay_ms"]) for k in keys),
        capacity_mbps=tuple(float(attrs[k]["capacity_mbps"]) for k in keys),
        reliability=tuple(float(attrs[k].get("reliability", 1.0)) for k in keys),
        demands=tuple(demands), weights=tuple(float(w) for w in weights), limits=limits,
    )


def build_model(snapshot, states, demands, weights, limits: MilpLimits = MilpLimits(), *,
                node_power=None, exclude: Iterable[tuple[int, int]] = ()) -> MilpInstance:
    """Instance over a topology snapshot.

    ``demands`` are :class:`Commodity` values (or anything with ``id``,
    ``source``, ``destination`` and ``bandwidth_mbps``); ``exclude`` drops
    links from the logical topology before modelling.
    """
    n_sats = snapshot.n_satellites
    stations = tuple(range(n_sats, snapshot.n_nodes))
    commodities = []
    for d in demands:
        if d.source not in stations or d.destination not in stations:
            raise ModelError(f"demand {d.id}: endpoint not a ground station of the snapshot")
        commodities.append(Commodity(d.id, d.source, d.destination, float(d.bandwidth_mbps)))
    if node_power is None:
        node_power = np.zeros(snapshot.n_nodes)
    excluded = set(exclude)
    states = states or {}
    keys, delay, cap, rel = [], [], [], []
    for link in snapshot.links:
        if link.key in excluded:
            continue
        st = states.get(link.key)
        keys.append(link.key)
        delay.append(link.delay_ms)
        cap.append(link.capacity_mbps)
        r = 1.0 if st is None else st.reliability
        rel.append(min(max(r, RELIABILITY_FLOOR), 1.0))
    return MilpInstance(
        satellites=tuple(range(n_sats)), stations=stations,
        power={s: float(node_power[s]) for s in range(n_sats)},
        links=tuple(keys), delay_ms=tuple(delay), capacity_mbps=tuple(cap),
        reliability=tuple(rel), demands=tuple(commodities),
        weights=tuple(float(w) for w in weights), limits=limits,
    )


# -- assignments, independent of the matrix form -----------------------------

@dataclass(frozen=True)
class Assignment:
    x: Mapping[tuple[tuple[int, int], int], int]
    y: Mapping[tuple[int, int], int]
    z: Mapping[int, int]


def assignment_from_paths(model: MilpInstance, paths: Mapping[int, Sequence[int]]) -> Assignment:
    """0/1 assignment that routes demand position ``k`` along ``paths[k]``."""
    x = {(arc, k): 0 for k in range(len(model.demands)) for arc in model.arcs}
    y = {(s, k): 0 for k in range(len(model.demands)) for s in model.satellites}
    z = {s: 0 for s in model.satellites}
    for k, nodes in paths.items():
        for u, v in zip(nodes, nodes[1:]):
            if ((u, v), k) not in x:
                raise ModelError(f"path of demand {k} uses missing arc {(u, v)}")
            x[((u, v), k)] = 1
        for node in nodes:
            if model.is_satellite(node):
                y[(node, k)] = 1
                z[node] = 1
    return Assignment(x, y, z)


def evaluate_objective(model: MilpInstance, assignment: Assignment) -> float:
    """Objective value of a complete assignment, summed term by term."""
    alpha, beta, gamma = model.weights
    T = model.limits.node_delay_ms
    energy = reliab = latency = 0.0
    try:
        for s in model.satellites:
            energy += model.power.get(s, 0.0) * assignment.z[s]
            for k in range(len(model.demands)):
                latency += T * assignment.y[(s, k)]
        for l_idx, (i, j) in enumerate(model.links):
            used = sum(assignment.x[(arc, k)] for arc in ((i, j), (j, i))
                       for k in range(len(model.demands)))
            reliab += reliability_penalty(model.reliability[l_idx]) * used
            latency += model.delay_ms[l_idx] * used
    except KeyError as exc:
        raise EvaluationError(f"assignment lacks variable {exc.args[0]!r}") from None
    return alpha * energy + beta * reliab + gamma * latency


def check_constraints(model: MilpInstance, assignment: Assignment, tol: float = 1e-6) -> list[str]:
    """Every violated constraint, described in words (empty when feasible)."""
    bad: list[str] = []
    x, y, z = assignment.x, assignment.y, assignment.z
    K = len(model.demands)
    nodes = list(model.satellites) + list(model.stations)
    for var in list(x.values()) + list(y.values()) + list(z.values()):
        if var not in (0, 1):
            bad.append(f"non-binary value {var}")
            break
    for k, dem in enumerate(model.demands):
        out_f = {v: 0 for v in nodes}
        in_f = {v: 0 for v in nodes}
        for (u, v) in model.arcs:
            val = x[((u, v), k)]
            out_f[u] += val
            in_f[v] += val
        for h in nodes:
            want = 1 if h == dem.source else -1 if h == dem.destination else 0
            if out_f[h] - in_f[h] != want:
                bad.append(f"flow conservation: node {h}, demand {k}: {out_f[h] - in_f[h]} != {want}")
            if model.is_satellite(h) and in_f[h] + out_f[h] > DEGREE_LIMIT:
                bad.append(f"degree: satellite {h}, demand {k}: {in_f[h] + out_f[h]} > {DEGREE_LIMIT}")
        for (u, v) in model.arcs:
            if x[((u, v), k)]:
                if not ((model.is_satellite(u) or u == dem.source)
                        and (model.is_satellite(v) or v == dem.destination)):
                    bad.append(f"ground relay: arc {(u, v)} demand {k}")
                for node in (u, v):
                    if model.is_satellite(node) and y[(node, k)] < 1:
                        bad.append(f"coupling: arc {(u, v)} demand {k} without y[{node}]")
        for s in model.satellites:
            if y[(s, k)] > z[s]:
                bad.append(f"activation: y[{s},{k}] > z[{s}]")
    for l_idx, (i, j) in enumerate(model.links):
        cap = model.capacity_mbps[l_idx]
        loads = [sum(d.bandwidth_mbps * x[(arc, k)] for k, d in enumerate(model.demands))
                 for arc in ((i, j), (j, i))]
        if model.limits.shared_capacity:
            loads = [sum(loads)]
        for load in loads:
            if load > cap + tol:
                bad.append(f"capacity: link {(i, j)} load {load} > {cap}")
    for s in model.satellites:
        if model.power.get(s, 0.0) * z[s] > model.limits.power_limit + tol:
            bad.append(f"peak power: satellite {s}")
    return bad
