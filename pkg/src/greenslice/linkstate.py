"""Per-link operational state, slice metrics and per-slice SPF.

Each slice is a metric plus a link filter over one shared link-state
database.  SPF never transits a ground station other than the source.
Equal-metric paths are broken by hop count, then by the lexicographically
smallest node sequence.
"""
from __future__ import annotations

import csv
import heapq
import io
import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .constellation import Link, TopologySnapshot

LOW_RELY = "low-rely"
RELIABILITY_THRESHOLD = 0.7
PDR_SMOOTHING = 0.3
NODE_DELAY_MS = 10.0


class MeasurementError(ValueError):
    """Delivered traffic exceeds offered traffic."""


@dataclass(frozen=True)
class LinkState:
    key: tuple[int, int]
    capacity_mbps: float
    utilization: float = 0.0
    delivery_rate: float = 1.0
    affinity_tags: frozenset[str] = frozenset()

    @property
    def reliability(self) -> float:
        return self.delivery_rate * (1.0 - self.utilization)


def fresh_state(link: Link) -> LinkState:
    return LinkState(link.key, link.capacity_mbps)


def _tags(reliability: float, tags: frozenset[str], threshold: float) -> frozenset[str]:
    if reliability < threshold:
        return tags | {LOW_RELY}
    return tags - {LOW_RELY}


def update_link_state(state: LinkState, offered_mbps: float, delivered_mbps: float, *,
                      smoothing: float = PDR_SMOOTHING,
                      threshold: float = RELIABILITY_THRESHOLD) -> LinkState:
    """Fold one slot's measurement into the link state."""
    if delivered_mbps < 0 or offered_mbps < delivered_mbps - 1e-12:
        raise MeasurementError(f"offered {offered_mbps} < delivered {delivered_mbps}")
    if offered_mbps <= 0:
        util, pdr = 0.0, state.delivery_rate
    else:
        util = min(offered_mbps / state.capacity_mbps, 1.0)
        sample = min(delivered_mbps / offered_mbps, 1.0)
        pdr = (1.0 - smoothing) * state.delivery_rate + smoothing * sample
    new = replace(state, utilization=util, delivery_rate=pdr)
    return replace(new, affinity_tags=_tags(new.reliability, state.affinity_tags, threshold))


def states_for(snapshot: TopologySnapshot,
               states: Mapping[tuple[int, int], LinkState] | None) -> dict[tuple[int, int], LinkState]:
    """Carry known states onto the snapshot's link set; unseen links start fresh."""
    states = states or {}
    out = {}
    for link in snapshot.links:
        old = states.get(link.key)
        out[link.key] = fresh_state(link) if old is None else replace(old, capacity_mbps=link.capacity_mbps)
    return out


@dataclass(frozen=True)
class SliceConfig:
    algo_id: int
    metric_kind: str  # "energy" | "reliability" | "delay"
    weights: tuple[float, float, float]
    exclude_tags: frozenset[str] = frozenset()
    node_delay_ms: float = NODE_DELAY_MS

    def admits(self, state: LinkState | None) -> bool:
        return state is None or not (state.affinity_tags & self.exclude_tags)


ENERGY = SliceConfig(130, "energy", (1.0, 0.0, 0.0))
RELIABILITY = SliceConfig(129, "reliability", (0.0, 1.0, 0.0), frozenset({LOW_RELY}))
LATENCY = SliceConfig(128, "delay", (0.0, 0.0, 1.0))
SLICES: dict[int, SliceConfig] = {s.algo_id: s for s in (ENERGY, RELIABILITY, LATENCY)}


def slice_metric(slice_: SliceConfig, link: Link, state: LinkState | None,
                 node_power: Sequence[float] | np.ndarray, *, toward: int | None = None,
                 is_satellite: Callable[[int], bool] | None = None) -> float:
    """Link cost under ``slice_``; ``math.inf`` means the link is unusable.

    ``toward`` is the node the link is traversed into; the delay slice charges
    the node delay when that node is a satellite.
    """
    i, j = link.endpoints
    kind = slice_.metric_kind
    if kind == "energy":
        return (float(node_power[i]) + float(node_power[j])) / 2.0
    if kind == "reliability":
        r = 1.0 if state is None else state.reliability
        return -math.log(r) if r > 0 else math.inf
    if kind == "delay":
        enter = toward if toward is not None else j
        charge = is_satellite(enter) if is_satellite is not None else True
        return link.delay_ms + (slice_.node_delay_ms if charge else 0.0)
    raise ValueError(f"unknown metric kind {kind!r}")


@dataclass(frozen=True)
class SlicePath:
    algo_id: int
    node_sequence: tuple[int, ...]
    sid_stack: tuple[int, ...]
    total_metric: float
    total_delay_ms: float


def path_delay_ms(snapshot: TopologySnapshot, nodes: Sequence[int],
                  node_delay_ms: float = NODE_DELAY_MS,
                  links: Mapping[tuple[int, int], Link] | None = None) -> float:
    """Propagation along ``nodes`` plus the node delay of every satellite on it."""
    links = links if links is not None else snapshot.link_map()
    prop = 0.0
    for a, b in zip(nodes, nodes[1:]):
        prop += links[(a, b) if a < b else (b, a)].delay_ms
    n_sats = sum(1 for v in nodes if snapshot.is_satellite(v))
    return prop + node_delay_ms * n_sats


class SliceRouter:
    """Cached SPF trees of one slice over one snapshot."""

    def __init__(self, snapshot: TopologySnapshot, states: Mapping[tuple[int, int], LinkState] | None,
                 slice_: SliceConfig, node_power: Sequence[float] | np.ndarray | None = None, *,
                 power_limit: float | None = None, node_delay_ms: float = NODE_DELAY_MS):
        self.snapshot = snapshot
        self.node_delay_ms = node_delay_ms
        self.slice = slice_
        self.states = states or {}
        if node_power is None:
            node_power = np.zeros(snapshot.n_nodes)
        self.node_power = np.asarray(node_power, dtype=float)
        self.links = snapshot.link_map()
        blocked = set()
        if power_limit is not None:
            blocked = {v for v in range(snapshot.n_satellites) if self.node_power[v] > power_limit}
        self._adj: dict[int, list[tuple[int, float]]] = {v: [] for v in range(snapshot.n_nodes)}
        for link in snapshot.links:
            st = self.states.get(link.key)
            i, j = link.endpoints
            if not slice_.admits(st) or i in blocked or j in blocked:
                continue
            for a, b in ((i, j), (j, i)):
                w = slice_metric(slice_, link, st, self.node_power, toward=b,
                                 is_satellite=snapshot.is_satellite)
                if math.isfinite(w):
                    self._adj[a].append((b, w))
        self._trees: dict[int, dict[int, tuple[float, tuple[int, ...]]]] = {}

    def tree(self, source: int) -> dict[int, tuple[float, tuple[int, ...]]]:
        if source not in self._trees:
            self._trees[source] = self._dijkstra(source)
        return self._trees[source]

    def _dijkstra(self, source: int) -> dict[int, tuple[float, tuple[int, ...]]]:
        is_sat = self.snapshot.is_satellite
        done: dict[int, tuple[float, tuple[int, ...]]] = {}
        heap: list[tuple[float, int, tuple[int, ...]]] = [(0.0, 0, (source,))]
        while heap:
            d, hops, path = heapq.heappop(heap)
            v = path[-1]
            if v in done:
                continue
            done[v] = (d, path)
            if v != source and not is_sat(v):
                continue  # ground stations terminate paths
            for w, cost in self._adj[v]:
                if w not in done:
                    heapq.heappush(heap, (d + cost, hops + 1, path + (w,)))
        return done

    def shortest_path(self, u: int, v: int) -> tuple[int, ...] | None:
        hit = self.tree(u).get(v)
        return None if hit is None else hit[1]

    def slice_path(self, nodes: Sequence[int], metric: float | None = None) -> SlicePath:
        nodes = tuple(nodes)
        if metric is None:
            metric = self.path_metric(nodes)
        return SlicePath(
            self.slice.algo_id, nodes, build_sid_stack(nodes, self.shortest_path), metric,
            path_delay_ms(self.snapshot, nodes, self.node_delay_ms, self.links),
        )

    def path_metric(self, nodes: Sequence[int]) -> float:
        total = 0.0
        for a, b in zip(nodes, nodes[1:]):
            link = self.links[(a, b) if a < b else (b, a)]
            total += slice_metric(self.slice, link, self.states.get(link.key), self.node_power,
                                  toward=b, is_satellite=self.snapshot.is_satellite)
        return total


def compute_slice_tree(snapshot: TopologySnapshot, states: Mapping[tuple[int, int], LinkState] | None,
                       slice_: SliceConfig, source: int,
                       node_power: Sequence[float] | np.ndarray | None = None, *,
                       destinations: Iterable[int] | None = None,
                       router: SliceRouter | None = None,
                       power_limit: float | None = None) -> dict[int, SlicePath]:
    """Minimum-metric path from ``source`` to every reachable destination."""
    if not 0 <= source < snapshot.n_nodes:
        raise KeyError(f"source {source} not in snapshot")
    router = router or SliceRouter(snapshot, states, slice_, node_power, power_limit=power_limit)
    tree = router.tree(source)
    wanted = tree.keys() if destinations is None else [d for d in destinations if d in tree]
    return {d: router.slice_path(tree[d][1], tree[d][0]) for d in sorted(wanted) if d != source}


def build_sid_stack(path: Sequence[int],
                    shortest_path: Callable[[int, int], Sequence[int] | None] | None = None) -> tuple[int, ...]:
    """Compress ``path`` into segment endpoints.

    Each SID ends the longest stretch that coincides with the slice's own
    shortest path from the previous SID; without ``shortest_path`` every hop
    becomes a SID.
    """
    path = tuple(path)
    if not path:
        raise ValueError("empty path")
    if len(set(path)) != len(path):
        raise ValueError(f"path is not simple: {path}")
    if shortest_path is None:
        return path[1:]
    sids: list[int] = []
    cur = 0
    last = len(path) - 1
    while cur < last:
        nxt = cur + 1
        for v in range(last, cur + 1, -1):
            sp = shortest_path(path[cur], path[v])
            if sp is not None and tuple(sp) == path[cur:v + 1]:
                nxt = v
                break
        sids.append(path[nxt])
        cur = nxt
    return tuple(sids)


def link_states_csv(states: Mapping[tuple[int, int], LinkState]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["link", "utilization", "pdr", "reliability", "tags"])
    for key in sorted(states):
        st = states[key]
        w.writerow([f"{key[0]}-{key[1]}", f"{st.utilization:.6f}", f"{st.delivery_rate:.6f}",
                    f"{st.reliability:.6f}", ";".join(sorted(st.affinity_tags))])
    return buf.getvalue()


def slice_tree_json(tree: Mapping[int, SlicePath]) -> str:
    records = [
        {"algo": p.algo_id, "destination": d, "nodes": list(p.node_sequence),
         "sids": list(p.sid_stack), "metric": p.total_metric, "delay_ms": p.total_delay_ms}
        for d, p in sorted(tree.items())
    ]
    return json.dumps(records, indent=1)
