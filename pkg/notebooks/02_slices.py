"""
Three slices over one link-state database
=========================================

Slice 130 minimizes satellite power, 129 avoids unreliable links and 128
minimizes delay.  Here we compute each slice's path between Ottawa and
Vancouver, then load a link until it gets tagged low-rely and watch 129
route around it.
"""
from greenslice.constellation import build_constellation, propagate
from greenslice.linkstate import LOW_RELY, SLICES, SliceRouter, states_for, update_link_state
from greenslice.trafficlab import CpuModel

c = build_constellation()
ott, van = c.station_id("Ottawa"), c.station_id("Vancouver")
snap = propagate(c, 12)
power = CpuModel().node_power(snap, "flexalgo", 20.0)
states = states_for(snap, None)


def show(states):
    for algo in (130, 129, 128):
        router = SliceRouter(snap, states, SLICES[algo], power, power_limit=32.0)
        path = router.slice_path(router.shortest_path(ott, van))
        print(f"  algo {algo}: {len(path.node_sequence) - 2} satellites, {path.total_delay_ms:6.1f} ms, "
              f"SID stack {path.sid_stack}")
    return path


print("fresh link state:")
fastest = show(states)

# push 30 Mbps through the first hop of the 128 path for a few slots
first = tuple(sorted(fastest.node_sequence[:2]))
for _ in range(4):
    states[first] = update_link_state(states[first], 30.0, 25.0)
print(f"link {first}: reliability {states[first].reliability:.2f}, tagged {LOW_RELY in states[first].affinity_tags}")

print("after congestion:")
show(states)
