"""Walker constellation generation, circular-orbit propagation and visibility.

Satellites fly circular orbits at a common altitude per shell. Positions are
computed in a geocentric inertial frame as
Rz(ascending node) @ Rx(inclination) @ (a*cos(u), a*sin(u), 0) with a the
orbit radius and u the argument of latitude. Ground clusters are fixed on the
rotating Earth; their inertial longitude advances at 360 deg per sidereal day.
"""
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import (
    EARTH_MU_KM3_S2,
    EARTH_RADIUS_KM,
    GEO_ALTITUDE_KM,
    SIDEREAL_DAY_S,
)

SatId = tuple[int, int]  # (orbit index, slot index within orbit)


class ConfigurationError(ValueError):
    """Raised when a constellation or scenario parameter violates its bounds."""


@dataclass(frozen=True)
class ConstellationSpec:
    """Walker shell: num_orbits evenly spaced planes of sats_per_orbit each.

    pattern 'star' spreads ascending nodes over 180 degrees, 'delta' over 360.
    phasing_factor F shifts the in-plane anomaly of plane n by
    F * n * 360/total_sats degrees (standard T/P/F Walker notation).
    """

    num_orbits: int
    sats_per_orbit: int
    altitude_km: float
    inclination_deg: float
    phasing_factor: int = 0
    pattern: str = "delta"

    def __post_init__(self):
        if self.num_orbits < 1 or self.sats_per_orbit < 1:
            raise ConfigurationError("constellation needs >= 1 orbit and >= 1 satellite per orbit")
        if self.altitude_km <= 0:
            raise ConfigurationError("altitude_km must be > 0")
        if not 0.0 <= self.inclination_deg <= 180.0:
            raise ConfigurationError("inclination_deg must lie in [0, 180]")
        if not 0 <= self.phasing_factor < self.num_orbits:
            raise ConfigurationError("phasing_factor must lie in [0, num_orbits)")
        if self.pattern not in ("star", "delta"):
            raise ConfigurationError("pattern must be 'star' or 'delta'")

    @property
    def total_sats(self) -> int:
        return self.num_orbits * self.sats_per_orbit

    @property
    def orbit_radius_km(self) -> float:
        return EARTH_RADIUS_KM + self.altitude_km

    @classmethod
    def walker(cls, total_sats, num_orbits, phasing_factor, altitude_km,
               inclination_deg, pattern="delta"):
        """Build from T/P/F notation; T must be divisible by P."""
        if total_sats % num_orbits != 0:
            raise ConfigurationError(
                f"total_sats={total_sats} not divisible by num_orbits={num_orbits}")
        return cls(num_orbits, total_sats // num_orbits, altitude_km,
                   inclination_deg, phasing_factor, pattern)


@dataclass(frozen=True)
class SatelliteEphemeris:
    sat_id: SatId
    position_km: np.ndarray
    epoch_s: float


@dataclass(frozen=True)
class GroundCluster:
    """Fixed surface region; device_weights are the aggregation weights of the
    devices it hosts (global sum over all clusters must be 1)."""

    cluster_id: int
    lat_deg: float
    lon_deg: float
    device_weights: tuple = field(default_factory=tuple)


def orbital_period_s(spec: ConstellationSpec) -> float:
    """Circular two-body period 2*pi*sqrt(a^3/mu)."""
    a = spec.orbit_radius_km
    return 2.0 * math.pi * math.sqrt(a ** 3 / EARTH_MU_KM3_S2)


def raan_rad(spec: ConstellationSpec) -> np.ndarray:
    """Ascending node longitude per orbit plane."""
    spread = math.pi if spec.pattern == "star" else 2.0 * math.pi
    return spread * np.arange(spec.num_orbits) / spec.num_orbits


def positions(spec: ConstellationSpec, t: float) -> np.ndarray:
    """All satellite positions at time t as a (total_sats, 3) array in km.

    Row order is (orbit 0 slot 0), (orbit 0 slot 1), ..., i.e. index
    n * sats_per_orbit + k for satellite (n, k).
    """
    if t < 0:
        raise ConfigurationError("t must be >= 0")
    a = spec.orbit_radius_km
    n_mean = math.sqrt(EARTH_MU_KM3_S2 / a ** 3)  # rad/s
    inc = math.radians(spec.inclination_deg)
    nodes = raan_rad(spec)

    n_idx = np.repeat(np.arange(spec.num_orbits), spec.sats_per_orbit)
    k_idx = np.tile(np.arange(spec.sats_per_orbit), spec.num_orbits)
    # Argument of latitude: even in-plane spacing + Walker inter-plane phasing.
    u = (2.0 * math.pi * k_idx / spec.sats_per_orbit
         + 2.0 * math.pi * spec.phasing_factor * n_idx / spec.total_sats
         + n_mean * t)

    cos_u, sin_u = np.cos(u), np.sin(u)
    # In-plane coords rotated by inclination about x, then by node about z.
    x_orb = a * cos_u
    y_orb = a * sin_u * math.cos(inc)
    z_orb = a * sin_u * math.sin(inc)
    cos_g, sin_g = np.cos(nodes[n_idx]), np.sin(nodes[n_idx])
    out = np.empty((spec.total_sats, 3))
    out[:, 0] = x_orb * cos_g - y_orb * sin_g
    out[:, 1] = x_orb * sin_g + y_orb * cos_g
    out[:, 2] = z_orb
    return out


def propagate(spec: ConstellationSpec, t: float) -> list[SatelliteEphemeris]:
    """One ephemeris per satellite at time t, ordered by (orbit, slot)."""
    pos = positions(spec, t)
    out = []
    for n in range(spec.num_orbits):
        for k in range(spec.sats_per_orbit):
            out.append(SatelliteEphemeris((n, k), pos[n * spec.sats_per_orbit + k], t))
    return out


def comm_radius_km(altitude_km: float) -> float:
    """Maximum ISL range 2*sqrt((R_E+h)^2 - R_E^2): twice the horizon slant,
    so the link line keeps clear of the Earth's limb."""
    if altitude_km <= 0:
        raise ConfigurationError("altitude_km must be > 0")
    h_star = EARTH_RADIUS_KM + altitude_km
    return 2.0 * math.sqrt(h_star ** 2 - EARTH_RADIUS_KM ** 2)


def _ring_adjacent(i: int, j: int, ring_size: int) -> bool:
    d = abs(i - j)
    return d == 1 or d == ring_size - 1


def nearest_in_orbit(from_pos: np.ndarray, orbit_positions: np.ndarray) -> tuple[int, float]:
    """Index (slot) and distance of the closest satellite in another orbit.

    Ties resolve to the lowest slot index (argmin keeps the first minimum).
    """
    d = np.linalg.norm(orbit_positions - from_pos, axis=1)
    k = int(np.argmin(d))
    return k, float(d[k])


def isl_feasible(a: SatelliteEphemeris, b: SatelliteEphemeris,
                 spec: ConstellationSpec,
                 ephemerides: list[SatelliteEphemeris]) -> bool:
    """Whether a may open a laser ISL toward b.

    Same orbit: only ring-adjacent slots (an intermediate satellite blocks the
    line). Different orbits: the Euclidean distance must not exceed the smaller
    communication radius of the two shells and b must be a's nearest in-range
    satellite within b's orbit. The full ephemeris list is required to evaluate
    the nearest-in-orbit rule.
    """
    if a.sat_id == b.sat_id:
        raise ConfigurationError("isl_feasible requires two distinct satellites")
    na, ka = a.sat_id
    nb, kb = b.sat_id
    if na == nb:
        return _ring_adjacent(ka, kb, spec.sats_per_orbit)
    radius = comm_radius_km(spec.altitude_km)
    dist = float(np.linalg.norm(a.position_km - b.position_km))
    if dist > radius:
        return False
    orbit_b = np.array([e.position_km for e in ephemerides if e.sat_id[0] == nb])
    k_near, _ = nearest_in_orbit(a.position_km, orbit_b)
    return k_near == kb


def feasible_isl_pairs(spec: ConstellationSpec, pos: np.ndarray) -> list[tuple[int, int]]:
    """Unordered satellite-index pairs holding a feasible ISL.

    Intra-orbit: the ring of adjacent slots. Inter-orbit: for each satellite
    and each other orbit, the nearest in-range satellite of that orbit; a pair
    is kept if either endpoint selects the other.
    """
    s = spec.sats_per_orbit
    pairs = set()
    for n in range(spec.num_orbits):
        base = n * s
        if s == 2:
            pairs.add((base, base + 1))
        elif s >= 3:
            for k in range(s):
                pairs.add(tuple(sorted((base + k, base + (k + 1) % s))))
    radius = comm_radius_km(spec.altitude_km)
    for n in range(spec.num_orbits):
        for m in range(spec.num_orbits):
            if m == n:
                continue
            block = pos[m * s:(m + 1) * s]
            for k in range(s):
                i = n * s + k
                k_near, dist = nearest_in_orbit(pos[i], block)
                if dist <= radius:
                    pairs.add(tuple(sorted((i, m * s + k_near))))
    return sorted(pairs)


def earth_rotation_deg(t: float) -> float:
    """Inertial longitude advance of an Earth-fixed point after t seconds."""
    return 360.0 * t / SIDEREAL_DAY_S


def cluster_position_km(cluster: GroundCluster, t: float) -> np.ndarray:
    """Inertial surface position of the cluster at time t."""
    lat = math.radians(cluster.lat_deg)
    lon = math.radians(cluster.lon_deg + earth_rotation_deg(t))
    return EARTH_RADIUS_KM * np.array([
        math.cos(lat) * math.cos(lon),
        math.cos(lat) * math.sin(lon),
        math.sin(lat),
    ])


def serving_satellite(cluster: GroundCluster,
                      ephemerides: list[SatelliteEphemeris]) -> SatId:
    """Satellite whose sub-satellite point is great-circle closest to the
    cluster; ties go to the lowest (orbit, slot). Uses the ephemerides' epoch
    for Earth rotation."""
    if not ephemerides:
        raise ConfigurationError("ephemeris list is empty")
    epoch = ephemerides[0].epoch_s
    c = cluster_position_km(cluster, epoch)
    c_unit = c / np.linalg.norm(c)
    pos = np.array([e.position_km for e in ephemerides])
    unit = pos / np.linalg.norm(pos, axis=1, keepdims=True)
    dots = unit @ c_unit  # max dot product = min subtended angle
    best = np.max(dots)
    return min(ephemerides[i].sat_id for i in np.nonzero(dots == best)[0])


def serving_satellite_index(cluster_pos_unit: np.ndarray, sat_pos: np.ndarray) -> int:
    """Fast path: index of the serving satellite for a precomputed geometry."""
    unit = sat_pos / np.linalg.norm(sat_pos, axis=1, keepdims=True)
    return int(np.argmax(unit @ cluster_pos_unit))


def geo_positions_km(t: float, count: int = 3) -> np.ndarray:
    """Geostationary relay positions: equally spaced equatorial ring at
    geosynchronous radius, co-rotating with the Earth."""
    r = EARTH_RADIUS_KM + GEO_ALTITUDE_KM
    lon = np.radians(360.0 * np.arange(count) / count + earth_rotation_deg(t))
    return r * np.column_stack([np.cos(lon), np.sin(lon), np.zeros(count)])


def geo_slant_range_km(sat_pos: np.ndarray, t: float) -> np.ndarray:
    """Distance from each satellite row to its nearest geostationary relay."""
    geo = geo_positions_km(t)
    d = np.linalg.norm(sat_pos[:, None, :] - geo[None, :, :], axis=2)
    return d.min(axis=1)


def write_ephemeris_csv(path, spec: ConstellationSpec, times) -> None:
    """CSV export with columns (t_s, orbit, slot, x_km, y_km, z_km)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "orbit", "slot", "x_km", "y_km", "z_km"])
        for t in times:
            pos = positions(spec, t)
            for n in range(spec.num_orbits):
                for k in range(spec.sats_per_orbit):
                    p = pos[n * spec.sats_per_orbit + k]
                    w.writerow([repr(float(t)), n, k, repr(float(p[0])),
                                repr(float(p[1])), repr(float(p[2]))])
