"""Two-shell Walker constellation, analytic propagation and link topology.

Satellites fly circular Keplerian orbits; every slot the positions are
recomputed in an Earth-fixed frame and the "+grid" ISL pattern plus the
ground-to-satellite links are rebuilt from scratch.  Node ids are plain
integers: satellites first (``0 .. S-1``), then ground stations.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

EARTH_RADIUS_KM = 6371.0
EARTH_MU_KM3_S2 = 398600.4418
EARTH_ROTATION_RAD_S = 7.2921159e-5
SPEED_OF_LIGHT_KM_S = 299_792.458
# Greenwich angle at slot 0; fixed so snapshots are reproducible.
EPOCH_GMST_DEG = 0.0

TERMINALS_PER_SATELLITE = 4


class ConfigurationError(ValueError):
    """Raised for geometrically invalid constellation settings."""


@dataclass(frozen=True)
class ShellConfig:
    satellite_count: int
    altitude_km: float
    inclination_deg: float
    plane_count: int
    phasing: int = 0
    # 180 gives a Walker star (near-polar shells), 360 a Walker delta.
    raan_spread_deg: float = 360.0
    # inter-plane ISLs are switched off when either end is above this latitude
    isl_latitude_limit_deg: float | None = None
    name: str = ""

    def validate(self) -> None:
        if self.satellite_count <= 0 or self.plane_count <= 0:
            raise ConfigurationError(f"shell {self.name!r}: counts must be positive")
        if self.satellite_count % self.plane_count:
            raise ConfigurationError(
                f"shell {self.name!r}: {self.satellite_count} satellites not divisible "
                f"by {self.plane_count} planes"
            )
        if not self.altitude_km > 0:
            raise ConfigurationError(f"shell {self.name!r}: altitude must be > 0")
        if not 0.0 <= self.inclination_deg <= 180.0:
            raise ConfigurationError(f"shell {self.name!r}: inclination outside [0, 180]")
        if not 0.0 < self.raan_spread_deg <= 360.0:
            raise ConfigurationError(f"shell {self.name!r}: raan_spread_deg outside (0, 360]")
        if self.plane_count > 1 and self.inclination_deg in (0.0, 180.0):
            # every plane would be the same equatorial orbit
            raise ConfigurationError(f"shell {self.name!r}: an equatorial shell needs a single plane")

    @property
    def sats_per_plane(self) -> int:
        return self.satellite_count // self.plane_count


@dataclass(frozen=True)
class GroundStation:
    name: str
    latitude_deg: float
    longitude_deg: float
    min_elevation_deg: float = 25.0

    def validate(self) -> None:
        if abs(self.latitude_deg) > 90 or abs(self.longitude_deg) > 180:
            raise ConfigurationError(f"station {self.name!r}: coordinates out of range")
        if not 0.0 <= self.min_elevation_deg < 90.0:
            raise ConfigurationError(f"station {self.name!r}: elevation mask outside [0, 90)")


@dataclass(frozen=True)
class Satellite:
    id: int
    shell: int
    plane: int
    slot_in_plane: int
    cpu_power: float = 0.0
    terminal_count: int = TERMINALS_PER_SATELLITE


class LinkKind(str, enum.Enum):
    INTRA_PLANE = "intra"
    INTER_PLANE = "inter"
    GROUND = "ground"


@dataclass(frozen=True)
class Link:
    endpoints: tuple[int, int]
    kind: LinkKind
    distance_km: float
    delay_ms: float
    capacity_mbps: float

    @property
    def key(self) -> tuple[int, int]:
        return self.endpoints


# Lightspeed-like defaults; plane counts and the inclined-shell inclination are
# assumptions, only totals and altitudes are published.
LIGHTSPEED_SHELLS = (
    ShellConfig(78, 1015.0, 99.0, 6, phasing=1, raan_spread_deg=180.0,
                isl_latitude_limit_deg=75.0, name="polar"),
    ShellConfig(120, 1325.0, 50.88, 10, phasing=1, name="inclined"),
)

DEFAULT_STATIONS = (
    GroundStation("Ottawa", 45.42, -75.70),
    GroundStation("Vancouver", 49.28, -123.12),
    GroundStation("Toronto", 43.65, -79.38),
    GroundStation("Montreal", 45.50, -73.57),
    GroundStation("Halifax", 44.65, -63.57),
    GroundStation("Winnipeg", 49.90, -97.14),
    GroundStation("Regina", 50.45, -104.61),
    GroundStation("Calgary", 51.05, -114.07),
    GroundStation("Edmonton", 53.55, -113.49),
    GroundStation("Quebec City", 46.81, -71.21),
)


def propagation_delay(distance_km: float) -> float:
    """One-way light-time in milliseconds."""
    if distance_km < 0:
        raise ValueError(f"negative distance {distance_km}")
    return distance_km / SPEED_OF_LIGHT_KM_S * 1000.0


def geodetic_to_ecef(latitude_deg: float, longitude_deg: float,
                     radius_km: float = EARTH_RADIUS_KM) -> np.ndarray:
    lat, lon = math.radians(latitude_deg), math.radians(longitude_deg)
    return radius_km * np.array(
        [math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat)]
    )


def elevation_deg(station_ecef: np.ndarray, target_ecef: np.ndarray) -> np.ndarray:
    """Elevation of ``target_ecef`` (N x 3) above the local horizon of a station."""
    up = station_ecef / np.linalg.norm(station_ecef)
    rel = np.atleast_2d(target_ecef) - station_ecef
    sin_el = rel @ up / np.linalg.norm(rel, axis=1)
    return np.degrees(np.arcsin(np.clip(sin_el, -1.0, 1.0)))


@dataclass(frozen=True)
class Constellation:
    shells: tuple[ShellConfig, ...]
    stations: tuple[GroundStation, ...]
    satellites: tuple[Satellite, ...]
    isl_capacity_mbps: float = 25.0
    ground_capacity_mbps: float = 25.0
    # orbital elements, one row per satellite
    radius_km: np.ndarray = field(repr=False, default=None)
    inclination_rad: np.ndarray = field(repr=False, default=None)
    raan_rad: np.ndarray = field(repr=False, default=None)
    arglat0_rad: np.ndarray = field(repr=False, default=None)
    mean_motion_rad_s: np.ndarray = field(repr=False, default=None)

    @property
    def n_satellites(self) -> int:
        return len(self.satellites)

    @property
    def n_nodes(self) -> int:
        return len(self.satellites) + len(self.stations)

    def station_id(self, name: str) -> int:
        for k, st in enumerate(self.stations):
            if st.name == name:
                return self.n_satellites + k
        raise KeyError(f"unknown ground station {name!r}")

    def is_satellite(self, node: int) -> bool:
        return 0 <= node < self.n_satellites

    def node_name(self, node: int) -> str:
        if self.is_satellite(node):
            sat = self.satellites[node]
            return f"sat{sat.shell}-{sat.plane:02d}-{sat.slot_in_plane:02d}"
        return self.stations[node - self.n_satellites].name


def build_constellation(shells: Sequence[ShellConfig] = LIGHTSPEED_SHELLS,
                        stations: Sequence[GroundStation] = DEFAULT_STATIONS,
                        *, isl_capacity_mbps: float = 25.0,
                        ground_capacity_mbps: float = 25.0) -> Constellation:
    """Lay out every shell as an evenly phased Walker pattern."""
    if not shells:
        raise ConfigurationError("at least one shell is required")
    if not stations:
        raise ConfigurationError("at least one ground station is required")
    for shell in shells:
        shell.validate()
    for st in stations:
        st.validate()
    if len({st.name for st in stations}) != len(stations):
        raise ConfigurationError("ground station names must be unique")
    if isl_capacity_mbps <= 0 or ground_capacity_mbps <= 0:
        raise ConfigurationError("link capacities must be positive")

    sats, radius, inc, raan, u0, n = [], [], [], [], [], []
    for s_idx, shell in enumerate(shells):
        per_plane = shell.sats_per_plane
        r = EARTH_RADIUS_KM + shell.altitude_km
        motion = math.sqrt(EARTH_MU_KM3_S2 / r**3)
        for p in range(shell.plane_count):
            plane_raan = math.radians(p * shell.raan_spread_deg / shell.plane_count)
            for j in range(per_plane):
                arg = 2 * math.pi * j / per_plane + 2 * math.pi * shell.phasing * p / shell.satellite_count
                sats.append(Satellite(len(sats), s_idx, p, j))
                radius.append(r)
                inc.append(math.radians(shell.inclination_deg))
                raan.append(plane_raan)
                u0.append(arg)
                n.append(motion)

    return Constellation(
        shells=tuple(shells), stations=tuple(stations), satellites=tuple(sats),
        isl_capacity_mbps=isl_capacity_mbps, ground_capacity_mbps=ground_capacity_mbps,
        radius_km=np.array(radius), inclination_rad=np.array(inc), raan_rad=np.array(raan),
        arglat0_rad=np.array(u0), mean_motion_rad_s=np.array(n),
    )


def satellite_positions(constellation: Constellation, t_s: float) -> np.ndarray:
    """Earth-fixed satellite coordinates (km) at ``t_s`` seconds after epoch."""
    c = constellation
    u = c.arglat0_rad + c.mean_motion_rad_s * t_s
    cu, su = np.cos(u), np.sin(u)
    co, so = np.cos(c.raan_rad), np.sin(c.raan_rad)
    ci, si = np.cos(c.inclination_rad), np.sin(c.inclination_rad)
    eci = c.radius_km[:, None] * np.column_stack(
        [co * cu - so * su * ci, so * cu + co * su * ci, su * si]
    )
    theta = math.radians(EPOCH_GMST_DEG) + EARTH_ROTATION_RAD_S * t_s
    ct, st = math.cos(theta), math.sin(theta)
    x = ct * eci[:, 0] + st * eci[:, 1]
    y = -st * eci[:, 0] + ct * eci[:, 1]
    return np.column_stack([x, y, eci[:, 2]])


def station_positions(constellation: Constellation) -> np.ndarray:
    return np.array([geodetic_to_ecef(s.latitude_deg, s.longitude_deg)
                     for s in constellation.stations]).reshape(-1, 3)


@dataclass(frozen=True)
class TopologySnapshot:
    slot_index: int
    epoch_s: float
    links: tuple[Link, ...]
    positions: np.ndarray = field(repr=False)
    n_satellites: int = 0

    def __post_init__(self):
        self.positions.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.positions.shape[0]

    def is_satellite(self, node: int) -> bool:
        return 0 <= node < self.n_satellites

    def link_map(self) -> dict[tuple[int, int], Link]:
        return {l.endpoints: l for l in self.links}

    def adjacency(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {v: [] for v in range(self.n_nodes)}
        for l in self.links:
            i, j = l.endpoints
            adj[i].append(j)
            adj[j].append(i)
        for v in adj:
            adj[v].sort()
        return adj

    def isl_degree(self) -> np.ndarray:
        deg = np.zeros(self.n_satellites, dtype=int)
        for l in self.links:
            if l.kind is not LinkKind.GROUND:
                deg[list(l.endpoints)] += 1
        return deg

    def stations_in_view(self) -> np.ndarray:
        """Number of ground stations each satellite currently links to."""
        seen = np.zeros(self.n_satellites, dtype=int)
        for l in self.links:
            if l.kind is LinkKind.GROUND:
                seen[l.endpoints[0]] += 1
        return seen

    def to_csv(self) -> str:
        adj = self.adjacency()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["node", "x", "y", "z", "links"])
        for v in range(self.n_nodes):
            x, y, z = self.positions[v]
            w.writerow([v, f"{x:.3f}", f"{y:.3f}", f"{z:.3f}", ";".join(map(str, adj[v]))])
        return buf.getvalue()


def _make_link(i: int, j: int, kind: LinkKind, pos: np.ndarray, capacity: float) -> Link:
    a, b = (i, j) if i < j else (j, i)
    dist = float(np.linalg.norm(pos[a] - pos[b]))
    return Link((a, b), kind, dist, propagation_delay(dist), capacity)


def _latitudes_deg(pos: np.ndarray) -> np.ndarray:
    return np.degrees(np.arcsin(pos[:, 2] / np.linalg.norm(pos, axis=1)))


def propagate(constellation: Constellation, slot_index: int,
              slot_duration_s: float = 10.0) -> TopologySnapshot:
    """Positions and rebuilt link set at ``slot_index * slot_duration_s``."""
    if slot_index < 0:
        raise ValueError("slot_index must be >= 0")
    c = constellation
    t = slot_index * slot_duration_s
    sat_pos = satellite_positions(c, t)
    gs_pos = station_positions(c)
    pos = np.vstack([sat_pos, gs_pos])
    lat = _latitudes_deg(sat_pos)

    links: dict[tuple[int, int], Link] = {}
    base = 0
    for shell in c.shells:
        per_plane = shell.sats_per_plane
        ids = np.arange(base, base + shell.satellite_count).reshape(shell.plane_count, per_plane)
        for p in range(shell.plane_count):
            for j in range(per_plane):
                a, b = ids[p, j], ids[p, (j + 1) % per_plane]
                if a != b:
                    lk = _make_link(int(a), int(b), LinkKind.INTRA_PLANE, pos, c.isl_capacity_mbps)
                    links.setdefault(lk.key, lk)
        wraps = shell.raan_spread_deg >= 360.0 and shell.plane_count > 2
        pairs = [(p, p + 1) for p in range(shell.plane_count - 1)]
        if wraps:
            pairs.append((shell.plane_count - 1, 0))
        for p, q in pairs:
            # one offset per plane pair keeps the matching one-to-one (degree <= 4)
            src = sat_pos[ids[p]]
            best_off, best_cost = 0, math.inf
            for off in range(per_plane):
                cost = np.linalg.norm(src - sat_pos[np.roll(ids[q], -off)], axis=1).sum()
                if cost < best_cost - 1e-9:
                    best_off, best_cost = off, cost
            for j in range(per_plane):
                a, b = int(ids[p, j]), int(ids[q, (j + best_off) % per_plane])
                limit = shell.isl_latitude_limit_deg
                if limit is not None and (abs(lat[a]) > limit or abs(lat[b]) > limit):
                    continue
                lk = _make_link(a, b, LinkKind.INTER_PLANE, pos, c.isl_capacity_mbps)
                links.setdefault(lk.key, lk)
        base += shell.satellite_count

    for k, st in enumerate(c.stations):
        g = c.n_satellites + k
        el = elevation_deg(gs_pos[k], sat_pos)
        for s in np.flatnonzero(el >= st.min_elevation_deg):
            lk = _make_link(int(s), g, LinkKind.GROUND, pos, c.ground_capacity_mbps)
            links[lk.key] = lk

    ordered = tuple(links[key] for key in sorted(links))
    return TopologySnapshot(slot_index, t, ordered, pos, c.n_satellites)
