"""Slice-aware segment routing over a two-shell LEO constellation.

Modules: ``constellation`` (orbits and link sets), ``linkstate`` (link
measurements and per-slice SPF), ``milp`` (the unified routing model and its
solvers), ``trafficlab`` (scenarios, loss and CPU models), ``controller``
(per-slot decisions) and ``runner``/``cli`` (runs, ledgers and exports).
"""
from .constellation import (LIGHTSPEED_SHELLS, DEFAULT_STATIONS, GroundStation, ShellConfig,
                            TopologySnapshot, build_constellation, propagate)
from .controller import SlicePolicy, step, select_slice, install_routes
from .linkstate import ENERGY, LATENCY, RELIABILITY, LinkState, SliceConfig, compute_slice_tree
from .runner import RunConfig, load_config, run

__version__ = "0.1.0"
