"""
The unified routing MILP, three ways
====================================

One small instance solved by HiGHS, by the in-package branch and bound, and
by brute-force path enumeration.  Then the same model is written in LP text
format for an external solver.
"""
from greenslice.milp import Commodity, MilpLimits, build_instance, oracle_solve, solve, write_lp

# two ground stations (10, 11) and a 4-satellite ladder
links = {
    (10, 0): dict(delay_ms=4.0, capacity_mbps=25.0, reliability=1.0),
    (10, 2): dict(delay_ms=6.0, capacity_mbps=25.0, reliability=1.0),
    (0, 1): dict(delay_ms=8.0, capacity_mbps=25.0, reliability=0.6),
    (2, 3): dict(delay_ms=9.0, capacity_mbps=25.0, reliability=0.99),
    (0, 2): dict(delay_ms=3.0, capacity_mbps=25.0, reliability=1.0),
    (1, 3): dict(delay_ms=3.0, capacity_mbps=25.0, reliability=1.0),
    (1, 11): dict(delay_ms=4.0, capacity_mbps=25.0, reliability=1.0),
    (3, 11): dict(delay_ms=5.0, capacity_mbps=25.0, reliability=1.0),
}
power = {0: 9.0, 1: 8.0, 2: 4.0, 3: 5.0}
demands = [Commodity(0, 10, 11, 20.0), Commodity(1, 10, 11, 10.0)]

for weights in ((1, 0, 0), (0, 1, 0), (0, 0, 1)):
    m = build_instance(satellites=(0, 1, 2, 3), stations=(10, 11), power=power, links=links,
                       demands=demands, weights=weights, limits=MilpLimits(power_limit=32.0))
    highs, bnb, oracle = solve(m, tie_break=True), solve(m, method="bnb"), oracle_solve(m)
    print(f"weights {weights}: highs {highs.objective:.4f}  bnb {bnb.objective:.4f}  "
          f"oracle {oracle.objective:.4f}  paths {highs.paths}")

# capacity is shared, so the 20 + 10 Mbps demands cannot share a 25 Mbps link
print("capacity forces split:", set(highs.paths[0]) & set(highs.paths[1]) <= {10, 11})

print(write_lp(m)[:600])
