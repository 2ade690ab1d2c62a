"""
The per-slot controller around a hot-spot burst
===============================================

Walks flexalgo and ospf through slots 95-165 of the high-demand scenario by
hand, printing the active slice and the delivered share each slot.
"""
from greenslice.constellation import build_constellation, propagate
from greenslice.controller import ControllerConfig, SolveCache, initial_state, step
from greenslice.linkstate import states_for
from greenslice.trafficlab import ScenarioConfig, apply_traffic, generate_demands

c = build_constellation()
scenario = ScenarioConfig("high-demand")
cfg, cache = ControllerConfig(), SolveCache()
schemes = ("ospf", "flexalgo")
scheme_state = {s: initial_state(s) for s in schemes}
link_state = {s: None for s in schemes}

for slot in list(range(95, 105)) + list(range(157, 165)):
    snap = propagate(c, slot)
    demands = generate_demands(scenario, slot, c)
    line = [f"slot {slot}", "burst" if scenario.in_burst(slot) else "calm "]
    for s in schemes:
        cur = states_for(snap, link_state[s])
        res = step(slot, snap, cur, demands, scheme_state[s], cfg, cache)
        scheme_state[s] = res.state
        out = apply_traffic(snap, cur, {k: r.node_sequence for k, r in res.routes.items() if r}, demands)
        link_state[s] = out.states
        pdr = sum(out.delivered.values()) / sum(out.offered.values())
        tag = f"slice {res.state.active_slice}" if s == "flexalgo" else ""
        line.append(f"{s} pdr {pdr:.2f} {tag}")
    print("  ".join(line))
