import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_snapshot
from greenslice.constellation import propagate
from greenslice.trafficlab import (DEFAULT_BURSTS, URGENT, CpuModel, Demand, RoutingError, SatelliteActivity,
                                   ScenarioConfig, apply_traffic, cpu_proxy, empirical_cdf, generate_demands,
                                   metrics_csv, record_metrics)


def test_default_scenario_demand(lightspeed_constellation):
    c = lightspeed_constellation
    for slot in (0, 120, 499):
        (d,) = generate_demands(ScenarioConfig("default"), slot, c)
        assert d.bandwidth_mbps == 20.0
        assert (d.source, d.destination) == (c.station_id("Ottawa"), c.station_id("Vancouver"))


def test_high_demand_burst_totals_30(lightspeed_constellation):
    sc = ScenarioConfig("high-demand")
    lo, hi = DEFAULT_BURSTS[0]
    burst = generate_demands(sc, lo, lightspeed_constellation)
    assert sum(d.bandwidth_mbps for d in burst) == 30.0
    calm = generate_demands(sc, lo - 1, lightspeed_constellation)
    assert sum(d.bandwidth_mbps for d in calm) == 20.0
    after = generate_demands(sc, hi, lightspeed_constellation)
    assert sum(d.bandwidth_mbps for d in after) == 20.0


def test_urgent_only_inside_window(lightspeed_constellation):
    sc = ScenarioConfig("urgent-flow")
    assert all(d.cls != URGENT for d in generate_demands(sc, 10, lightspeed_constellation))
    inside = generate_demands(sc, DEFAULT_BURSTS[1][0] + 3, lightspeed_constellation)
    urgent = [d for d in inside if d.cls == URGENT]
    assert len(urgent) == 1 and urgent[0].bandwidth_mbps == 1.0


def test_demands_are_deterministic(lightspeed_constellation):
    sc = ScenarioConfig("high-demand", jitter_mbps=2.0, seed=3)
    assert generate_demands(sc, 130, lightspeed_constellation) == generate_demands(sc, 130,
                                                                                    lightspeed_constellation)


def test_scenario_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(total_slots=0).validate()
    with pytest.raises(ValueError):
        ScenarioConfig(burst_intervals=((450, 520),)).validate()
    with pytest.raises(ValueError):
        ScenarioConfig(name="rush-hour").validate()
    with pytest.raises(ValueError):
        Demand(0, 1, 1, 5.0)
    with pytest.raises(ValueError):
        Demand(0, 1, 2, 0.0)


def test_slot_outside_scenario(lightspeed_constellation):
    with pytest.raises(ValueError):
        generate_demands(ScenarioConfig(), 500, lightspeed_constellation)


# -- loss model -----------------------------------------------------------------------

def line(capacity=20.0):
    # ground 3 - sat 0 - sat 1 - ground 4 ; ground 3 - sat 2 - ground 4
    return make_snapshot(3, 2, {(3, 0): 1.0, (0, 1): 1.0, (1, 4): 1.0, (3, 2): 1.0, (2, 4): 1.0},
                         capacity=capacity)


def test_overloaded_link_fraction():
    snap = make_snapshot(1, 2, {(1, 0): 1.0, (0, 2): 1.0}, capacity=20.0)
    out = apply_traffic(snap, None, {0: (1, 0)}, [Demand(0, 1, 0 + 2, 30.0)])
    assert out.link_fraction[(0, 1)] == pytest.approx(2 / 3)


def test_two_overloaded_links_multiply():
    snap = make_snapshot(1, 2, {(1, 0): 1.0, (0, 2): 1.0}, capacity=20.0)
    out = apply_traffic(snap, None, {0: (1, 0, 2)}, [Demand(0, 1, 2, 30.0)])
    assert out.delivered[0] / out.offered[0] == pytest.approx(4 / 9)


def test_within_capacity_delivers_everything():
    out = apply_traffic(line(), None, {0: (3, 0, 1, 4), 1: (3, 2, 4)},
                        [Demand(0, 3, 4, 20.0), Demand(1, 3, 4, 10.0)])
    assert out.delivered == {0: 20.0, 1: 10.0}


def test_unrouted_demand_delivers_nothing():
    out = apply_traffic(line(), None, {0: None}, [Demand(0, 3, 4, 5.0)])
    assert out.delivered[0] == 0.0 and out.offered[0] == 5.0


def test_absent_link_is_a_routing_error():
    with pytest.raises(RoutingError):
        apply_traffic(line(), None, {0: (3, 1, 4)}, [Demand(0, 3, 4, 5.0)])


def test_link_states_follow_load():
    out = apply_traffic(line(), None, {0: (3, 2, 4)}, [Demand(0, 3, 4, 15.0)])
    assert out.states[(2, 3)].utilization == pytest.approx(0.75)
    assert out.states[(0, 3)].utilization == 0.0


@settings(max_examples=60, deadline=None)
@given(loads=st.lists(st.floats(0.5, 40), min_size=1, max_size=4),
       routes=st.lists(st.sampled_from([(3, 0, 1, 4), (3, 2, 4), (4, 1, 0, 3), None]), min_size=4,
                       max_size=4))
def test_loss_locality_and_conservation(loads, routes):
    snap = line()
    demands = [Demand(k, 3, 4, b) for k, b in enumerate(loads)]
    paths = {k: routes[k] for k in range(len(loads))}
    out = apply_traffic(snap, None, paths, demands)
    # independent recomputation of the per-link load and per-demand product
    load = {}
    for d in demands:
        p = paths[d.id]
        for a, b in zip(p or (), (p or ())[1:]):
            load[frozenset((a, b))] = load.get(frozenset((a, b)), 0.0) + d.bandwidth_mbps
    for d in demands:
        p = paths[d.id]
        expect = 0.0 if not p else math.prod(min(1.0, 20.0 / load[frozenset(e)]) for e in zip(p, p[1:]))
        assert out.delivered[d.id] / d.bandwidth_mbps == pytest.approx(expect, abs=1e-9)
    assert sum(out.delivered.values()) <= sum(out.offered.values()) + 1e-9


# -- CPU proxy -------------------------------------------------------------------------

@pytest.mark.parametrize("scheme", ["ospf", "srv6", "green", "flexalgo"])
def test_idle_satellite_is_base_idle(scheme):
    assert cpu_proxy(scheme, SatelliteActivity()) == 2.0


def test_cpu_is_clamped():
    assert cpu_proxy("ospf", SatelliteActivity(control_events=100, spf_runs=100)) == 100.0


@settings(max_examples=60, deadline=None)
@given(scheme=st.sampled_from(["ospf", "srv6", "green", "flexalgo"]), a=st.floats(0, 200),
       b=st.floats(0, 200), entries=st.integers(0, 300), events=st.integers(0, 5),
       view=st.integers(0, 3))
def test_more_traffic_never_lowers_cpu(scheme, a, b, entries, events, view):
    lo, hi = sorted((a, b))
    act = dict(flow_entries=entries, control_events=events, stations_in_view=view, spf_runs=1)
    assert cpu_proxy(scheme, SatelliteActivity(forwarded_mbps=lo, **act)) <= \
        cpu_proxy(scheme, SatelliteActivity(forwarded_mbps=hi, **act))


def test_node_power_ground_nodes_zero(lightspeed_constellation):
    snap = propagate(lightspeed_constellation, 0)
    p = CpuModel().node_power(snap, "flexalgo", 20.0)
    assert np.all(p[198:] == 0)
    view = snap.stations_in_view()
    assert p[:198] == pytest.approx(2.0 + 4.0 * view + 0.18 * 20.0)


# -- metrics -----------------------------------------------------------------------------

def test_single_delivered_path_metrics():
    r = record_metrics(3, "flexalgo", {0: 20.0}, {0: 20.0}, {0: 85.0}, {5: 10.0, 6: 20.0})
    assert (r.pdr, r.latency_ms, r.cpu_avg) == (1.0, 85.0, 15.0)


def test_zero_offered_convention():
    r = record_metrics(0, "ospf", {}, {}, {}, {})
    assert r.pdr == 1.0 and r.latency_ms is None
    assert metrics_csv([r]).splitlines()[1] == "0,ospf,0.000000,1.000000,"


def test_latency_is_demand_weighted():
    r = record_metrics(0, "srv6", {0: 20.0, 1: 10.0}, {0: 20.0, 1: 10.0}, {0: 40.0, 1: 70.0}, {})
    assert r.latency_ms == pytest.approx(50.0)


def test_metrics_csv_header():
    assert metrics_csv([]).strip() == "slot,scheme,cpu_avg,pdr,latency_ms"


def test_cdf_example():
    assert empirical_cdf([3.0, 1.0, 1.0, 2.0]) == [(1.0, 0.5), (2.0, 0.75), (3.0, 1.0)]
    assert empirical_cdf([]) == []


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=60))
def test_cdf_properties(values):
    cdf = empirical_cdf(values)
    xs = [v for v, _ in cdf]
    ps = [p for _, p in cdf]
    assert xs == sorted(set(xs)) and len(xs) == len(set(values))
    assert all(p1 < p2 for p1, p2 in zip(ps, ps[1:]))
    assert ps[-1] == 1.0
    # right-continuity: the step at x includes every sample equal to x
    for x, p in cdf:
        assert p == pytest.approx(sum(v <= x for v in values) / len(values))
