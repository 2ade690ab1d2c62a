"""
Two-shell constellation and its moving link set
===============================================

Builds the default 78 + 120 satellite constellation, steps it through a few
10 s slots and looks at what the Ottawa and Vancouver gateways can see.
"""
import numpy as np

from greenslice.constellation import LinkKind, build_constellation, propagate

c = build_constellation()
print(c.n_satellites, "satellites,", len(c.stations), "ground stations")

ott, van = c.station_id("Ottawa"), c.station_id("Vancouver")

# links come and go as the shells rotate under the stations
for slot in (0, 30, 60, 90):
    snap = propagate(c, slot)
    kinds = [l.kind for l in snap.links]
    adj = snap.adjacency()
    print(f"slot {slot:3d}: {kinds.count(LinkKind.INTRA_PLANE)} intra-plane, "
          f"{kinds.count(LinkKind.INTER_PLANE)} inter-plane, {kinds.count(LinkKind.GROUND)} ground links; "
          f"Ottawa sees {len(adj[ott])}, Vancouver sees {len(adj[van])}")

# every satellite keeps at most four ISL terminals busy
snap = propagate(c, 0)
print("max ISL degree:", snap.isl_degree().max())

# propagation delays in ms
delays = np.array([l.delay_ms for l in snap.links if l.kind is not LinkKind.GROUND])
print(f"ISL delay ms: min {delays.min():.2f}, median {np.median(delays):.2f}, max {delays.max():.2f}")

# a snapshot can be dumped for plotting elsewhere
print(snap.to_csv().splitlines()[0])
