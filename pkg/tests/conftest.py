import numpy as np
import pytest

from greenslice.constellation import Link, LinkKind, TopologySnapshot
from greenslice.constellation import build_constellation
from greenslice.milp import Commodity, MilpLimits, build_instance


def make_snapshot(n_sats, n_ground, edges, capacity=25.0, slot=0):
    """Hand-built snapshot: ``edges`` maps (i, j) to a delay in ms.

    Nodes ``0..n_sats-1`` are satellites, the rest ground stations.
    """
    links = []
    for (i, j), d in sorted(edges.items()):
        a, b = min(i, j), max(i, j)
        kind = LinkKind.GROUND if b >= n_sats else LinkKind.INTER_PLANE
        links.append(Link((a, b), kind, d * 299.792458, float(d), capacity))
    links.sort(key=lambda l: l.endpoints)
    pos = np.zeros((n_sats + n_ground, 3))
    return TopologySnapshot(slot, 0.0, tuple(links), pos, n_sats)


def random_instance(rng, max_nodes=10):
    """Connected toy instance: a satellite chain with random chords and 2-3 ground stations."""
    n = int(rng.integers(4, max_nodes + 1))
    n_ground = int(rng.integers(2, min(4, n - 1)))
    n_sats = n - n_ground
    sats = list(range(n_sats))
    grounds = list(range(n_sats, n))
    edges = set()
    order = list(rng.permutation(sats))
    for a, b in zip(order, order[1:]):
        edges.add((min(a, b), max(a, b)))
    for g in grounds:
        for s in rng.choice(sats, size=min(n_sats, int(rng.integers(1, 3))), replace=False):
            edges.add((int(s), g))
    for _ in range(int(rng.integers(0, n_sats))):
        a, b = rng.choice(sats, size=2, replace=False)
        edges.add((int(min(a, b)), int(max(a, b))))
    links = {e: dict(delay_ms=float(rng.uniform(1, 20)), capacity_mbps=float(rng.choice([15, 25, 40])),
                     reliability=float(rng.choice([1.0, rng.uniform(0.3, 1.0)]))) for e in sorted(edges)}
    power = {s: float(rng.uniform(1, 14)) for s in sats}
    demands = []
    for k in range(int(rng.integers(1, 4))):
        src, dst = rng.choice(grounds, size=2, replace=False)
        demands.append(Commodity(k, int(src), int(dst), float(rng.choice([5, 10, 15]))))
    w = rng.uniform(0.0, 2.0, size=3) * rng.integers(0, 2, size=3)
    if w.sum() == 0:
        w[int(rng.integers(0, 3))] = 1.0
    limits = MilpLimits(power_limit=float(rng.choice([11.0, 100.0])),
                        shared_capacity=bool(rng.integers(0, 2)))
    return build_instance(satellites=sats, stations=grounds, power=power, links=links, demands=demands,
                          weights=tuple(float(v) for v in w), limits=limits)


@pytest.fixture(scope="session")
def lightspeed_constellation():
    return build_constellation()


# one line per acceptance criterion, printed after the test session
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
