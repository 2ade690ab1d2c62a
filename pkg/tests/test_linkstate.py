import itertools
import json
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from conftest import make_snapshot
from greenslice.linkstate import (ENERGY, LATENCY, LOW_RELY, RELIABILITY, SLICES, LinkState,
                                  MeasurementError, SliceRouter, build_sid_stack, compute_slice_tree,
                                  fresh_state, link_states_csv, path_delay_ms, slice_metric,
                                  slice_tree_json, states_for, update_link_state)


# -- update_link_state ---------------------------------------------------------------

def test_half_loaded_fresh_link():
    s = update_link_state(LinkState((0, 1), 20.0), 10.0, 10.0)
    assert s.utilization == 0.5
    assert s.delivery_rate == 1.0
    assert s.reliability == 0.5
    assert LOW_RELY in s.affinity_tags


def test_no_traffic_keeps_pdr():
    s = LinkState((0, 1), 20.0, 0.6, 0.8)
    t = update_link_state(s, 0.0, 0.0)
    assert t.utilization == 0.0 and t.delivery_rate == 0.8
    assert t.reliability == pytest.approx(0.8)
    assert LOW_RELY not in t.affinity_tags


def test_reliability_formula():
    assert LinkState((0, 1), 20.0, 0.2, 0.95).reliability == pytest.approx(0.76)


def test_overflow_is_smoothed():
    s = update_link_state(LinkState((0, 1), 20.0), 30.0, 20.0)
    assert s.utilization == 1.0
    assert s.delivery_rate == pytest.approx(0.7 + 0.3 * 2 / 3)
    assert s.reliability == 0.0


def test_measurement_error():
    with pytest.raises(MeasurementError):
        update_link_state(LinkState((0, 1), 20.0), 5.0, 6.0)
    with pytest.raises(MeasurementError):
        update_link_state(LinkState((0, 1), 20.0), 5.0, -1.0)


@given(cap=st.floats(1, 100), offered=st.floats(0, 200), frac=st.floats(0, 1),
       pdr=st.floats(0.01, 1), util=st.floats(0, 1))
def test_state_invariants(cap, offered, frac, pdr, util):
    s = update_link_state(LinkState((0, 1), cap, util, pdr), offered, offered * frac)
    assert 0 <= s.utilization <= 1
    assert 0 < s.delivery_rate <= 1
    assert s.reliability == pytest.approx(s.delivery_rate * (1 - s.utilization))
    assert (LOW_RELY in s.affinity_tags) == (s.reliability < 0.7)


# -- slice metrics -------------------------------------------------------------------

def test_slice_weights_and_ids():
    assert ENERGY.weights == (1.0, 0.0, 0.0) and ENERGY.algo_id == 130
    assert RELIABILITY.weights == (0.0, 1.0, 0.0) and RELIABILITY.algo_id == 129
    assert LATENCY.weights == (0.0, 0.0, 1.0) and LATENCY.algo_id == 128
    assert all(s.node_delay_ms == 10.0 for s in SLICES.values())


def test_metric_examples():
    snap = make_snapshot(2, 1, {(0, 1): 7.0, (1, 2): 3.0})
    isl, gl = snap.link_map()[(0, 1)], snap.link_map()[(1, 2)]
    power = np.array([4.0, 8.0, 0.0])
    assert slice_metric(LATENCY, isl, None, power, toward=1, is_satellite=snap.is_satellite) == 17.0
    assert slice_metric(LATENCY, gl, None, power, toward=2, is_satellite=snap.is_satellite) == 3.0
    assert slice_metric(RELIABILITY, isl, LinkState((0, 1), 25.0), power) == 0.0
    half = LinkState((0, 1), 25.0, 0.5, 1.0)
    assert slice_metric(RELIABILITY, isl, half, power) == pytest.approx(math.log(2))
    dead = LinkState((0, 1), 25.0, 1.0, 1.0)
    assert slice_metric(RELIABILITY, isl, dead, power) == math.inf
    assert slice_metric(ENERGY, isl, None, power) == 6.0
    assert slice_metric(ENERGY, gl, None, power) == 4.0


# -- SPF -------------------------------------------------------------------------------

def _mesh():
    """3 x 4 satellite mesh between ground nodes 12 (west) and 13 (east)."""
    edges = {}
    for r in range(3):
        for c in range(4):
            v = 4 * r + c
            if c < 3:
                edges[(v, v + 1)] = 5.0
            if r < 2:
                edges[(v, v + 4)] = 5.0
    edges[(12, 4)] = 2.0
    edges[(7, 13)] = 2.0
    return make_snapshot(12, 2, edges)


def test_mesh_congested_link_detour():
    snap = _mesh()
    states = states_for(snap, None)
    states[(5, 6)] = LinkState((5, 6), 25.0, 0.95, 0.9, frozenset({LOW_RELY}))
    p129 = compute_slice_tree(snap, states, RELIABILITY, 12)[13]
    p128 = compute_slice_tree(snap, states, LATENCY, 12)[13]
    assert p128.node_sequence == (12, 4, 5, 6, 7, 13)
    arcs129 = set(zip(p129.node_sequence, p129.node_sequence[1:]))
    assert (5, 6) not in arcs129 and (6, 5) not in arcs129
    assert p129.total_delay_ms > p128.total_delay_ms


def test_uniform_metric_gives_min_hops():
    snap = _mesh()
    p = compute_slice_tree(snap, None, LATENCY, 12)[13]
    assert len(p.node_sequence) - 1 == 5
    # zero-cost reliability metric also prefers fewer hops
    q = compute_slice_tree(snap, None, RELIABILITY, 12)[13]
    assert len(q.node_sequence) == len(p.node_sequence)


def test_line_topology_same_path_for_all_slices():
    snap = make_snapshot(3, 2, {(3, 0): 2.0, (0, 1): 4.0, (1, 2): 6.0, (2, 4): 1.0})
    power = np.array([3.0, 9.0, 1.0, 0.0, 0.0])
    paths = {a: compute_slice_tree(snap, None, s, 3, power)[4].node_sequence for a, s in SLICES.items()}
    assert set(paths.values()) == {(3, 0, 1, 2, 4)}


def test_ground_station_never_relays():
    # the direct satellite chain is long, a hop through ground node 5 would be short
    snap = make_snapshot(3, 3, {(3, 0): 1.0, (0, 5): 1.0, (5, 2): 1.0, (0, 1): 50.0, (1, 2): 50.0,
                                (2, 4): 1.0})
    p = compute_slice_tree(snap, None, LATENCY, 3)[4]
    assert p.node_sequence == (3, 0, 1, 2, 4)


def test_unknown_source_and_isolated_source():
    snap = make_snapshot(2, 2, {(0, 1): 1.0, (1, 3): 1.0})
    with pytest.raises(KeyError):
        compute_slice_tree(snap, None, LATENCY, 99)
    assert compute_slice_tree(snap, None, LATENCY, 2) == {}


def test_power_limit_blocks_hot_satellites():
    snap = make_snapshot(2, 2, {(2, 0): 1.0, (0, 3): 1.0, (2, 1): 5.0, (1, 3): 5.0})
    power = np.array([50.0, 10.0, 0.0, 0.0])
    free = compute_slice_tree(snap, None, LATENCY, 2, power)[3]
    capped = compute_slice_tree(snap, None, LATENCY, 2, power, power_limit=32.0)[3]
    assert free.node_sequence == (2, 0, 3)
    assert capped.node_sequence == (2, 1, 3)


def test_delay_accounting_exact():
    snap = _mesh()
    for p in compute_slice_tree(snap, None, LATENCY, 12).values():
        nodes = p.node_sequence
        prop = sum(snap.link_map()[tuple(sorted(e))].delay_ms for e in zip(nodes, nodes[1:]))
        assert p.total_delay_ms == prop + 10.0 * sum(1 for v in nodes if v < 12)
        assert p.total_metric == pytest.approx(p.total_delay_ms)


# -- brute-force optimality on small random graphs --------------------------------------

@st.composite
def small_graphs(draw):
    n_sats = draw(st.integers(2, 8))
    n_ground = draw(st.integers(2, 3))
    n = n_sats + n_ground
    edges = {}
    for i, j in itertools.combinations(range(n), 2):
        if i >= n_sats and j >= n_sats:
            continue
        if draw(st.booleans()):
            edges[(i, j)] = draw(st.sampled_from([1.0, 2.0, 3.5, 5.0, 8.0]))
    assume(edges)
    power = [draw(st.sampled_from([1.0, 2.0, 4.0, 7.0])) for _ in range(n_sats)] + [0.0] * n_ground
    util = {e: draw(st.sampled_from([0.0, 0.2, 0.5, 0.9])) for e in edges}
    return n_sats, n_ground, edges, np.array(power), util


def _brute_force(snap, states, slice_, power, src, dst):
    g = nx.Graph()
    g.add_nodes_from(range(snap.n_nodes))
    for link in snap.links:
        if slice_.admits(states.get(link.key)):
            g.add_edge(*link.endpoints)
    best = math.inf
    links = snap.link_map()
    for path in nx.all_simple_paths(g, src, dst):
        if any(not snap.is_satellite(v) for v in path[1:-1]):
            continue
        total = 0.0
        for a, b in zip(path, path[1:]):
            link = links[(min(a, b), max(a, b))]
            total += slice_metric(slice_, link, states.get(link.key), power, toward=b,
                                  is_satellite=snap.is_satellite)
        best = min(best, total)
    return best


@settings(max_examples=60, deadline=None)
@given(small_graphs(), st.sampled_from([128, 129, 130]))
def test_spf_matches_brute_force(graph, algo):
    n_sats, n_ground, edges, power, util = graph
    snap = make_snapshot(n_sats, n_ground, edges)
    states = {}
    for link in snap.links:
        u = util[tuple(sorted(link.endpoints))] if tuple(sorted(link.endpoints)) in util else 0.0
        states[link.key] = update_link_state(fresh_state(link), u * 25.0, u * 25.0)
    slice_ = SLICES[algo]
    src = n_sats
    tree = compute_slice_tree(snap, states, slice_, src, power)
    for dst in range(n_sats + 1, n_sats + n_ground):
        want = _brute_force(snap, states, slice_, power, src, dst)
        if math.isinf(want):
            assert dst not in tree
            continue
        got = tree[dst]
        assert got.total_metric == pytest.approx(want, abs=1e-9)
        nodes = got.node_sequence
        assert len(set(nodes)) == len(nodes)
        assert all(snap.is_satellite(v) for v in nodes[1:-1])
        if algo == 129:
            for a, b in zip(nodes, nodes[1:]):
                assert LOW_RELY not in states[(min(a, b), max(a, b))].affinity_tags
            prod = math.prod(states[(min(a, b), max(a, b))].reliability for a, b in zip(nodes, nodes[1:]))
            assert math.exp(-got.total_metric) == pytest.approx(prod, abs=1e-9)
        assert set(got.sid_stack) <= set(nodes)
        assert got.sid_stack[-1] == dst


@settings(max_examples=40, deadline=None)
@given(small_graphs(), st.data())
def test_monotone_filtering(graph, data):
    n_sats, n_ground, edges, power, _ = graph
    snap = make_snapshot(n_sats, n_ground, edges)
    before = {l.key: fresh_state(l) for l in snap.links}
    tagged = data.draw(st.sets(st.sampled_from(sorted(before))))
    after = {k: (LinkState(k, 25.0, 0.0, 1.0, frozenset({LOW_RELY})) if k in tagged else v)
             for k, v in before.items()}
    src = n_sats
    t0 = compute_slice_tree(snap, before, RELIABILITY, src, power)
    t1 = compute_slice_tree(snap, after, RELIABILITY, src, power)
    assert set(t1) <= set(t0)
    for d in t1:
        assert t1[d].total_metric >= t0[d].total_metric - 1e-12


# -- SID stacks ----------------------------------------------------------------------------

def test_sid_stack_examples():
    assert build_sid_stack((3, 4)) == (4,)
    snap = _mesh()
    router = SliceRouter(snap, None, LATENCY)
    spf = router.shortest_path(12, 13)
    assert build_sid_stack(spf, router.shortest_path) == (13,)
    detour = (12, 4, 0, 1, 2, 3, 7, 13)
    stack = build_sid_stack(detour, router.shortest_path)
    assert len(stack) >= 2
    assert stack[-1] == 13
    assert [v for v in detour if v in stack] == list(stack)
    # every segment is itself the slice SPF path between its endpoints
    prev = 12
    for sid in stack:
        i, j = detour.index(prev), detour.index(sid)
        assert router.shortest_path(prev, sid) == detour[i:j + 1]
        prev = sid


def test_sid_stack_contract():
    with pytest.raises(ValueError):
        build_sid_stack(())
    with pytest.raises(ValueError):
        build_sid_stack((1, 2, 1))
    assert build_sid_stack((1, 2, 3, 4)) == (2, 3, 4)


def test_path_delay_helper():
    snap = make_snapshot(2, 2, {(2, 0): 1.5, (0, 1): 4.0, (1, 3): 2.5})
    assert path_delay_ms(snap, (2, 0, 1, 3)) == 1.5 + 4.0 + 2.5 + 20.0


def test_dumps():
    snap = _mesh()
    states = states_for(snap, None)
    text = link_states_csv(states).splitlines()
    assert text[0] == "link,utilization,pdr,reliability,tags"
    assert len(text) == 1 + len(snap.links)
    tree = compute_slice_tree(snap, states, LATENCY, 12)
    records = json.loads(slice_tree_json(tree))
    assert {r["destination"] for r in records} == set(tree)
    assert all(r["algo"] == 128 for r in records)
