"""Per-slot topology: ISL neighbor selection, gateway footprints and association."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .orbits import EARTH_RADIUS_KM, GroundSite, rotate_z, site_ecef


@dataclass(frozen=True)
class NeighborParams:
    max_neighbors: int = 4
    max_range_km: float = 5000.0
    max_plane_angle: float = math.radians(20.0)

    def __post_init__(self):
        if self.max_neighbors < 0:
            raise ValueError("max_neighbors must be >= 0")
        if self.max_range_km <= 0:
            raise ValueError("max_range_km must be positive")
        if not 0.0 < self.max_plane_angle <= math.pi:
            raise ValueError("max_plane_angle must lie in (0, pi]")


@dataclass(frozen=True)
class FootprintParams:
    min_elevation: float = math.radians(25.0)
    earth_radius_km: float = EARTH_RADIUS_KM

    def __post_init__(self):
        if not 0.0 <= self.min_elevation < math.pi / 2:
            raise ValueError("min_elevation must lie in [0, pi/2)")


@dataclass(frozen=True)
class TopologySnapshot:
    t: int
    neighbors: tuple[tuple[int, ...], ...]
    gateway_of: tuple[int | None, ...]
    visible: np.ndarray
    links: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pairs = [(k, m) for k, nbrs in enumerate(self.neighbors) for m in nbrs]
        links = np.array(pairs, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "links", links)

    @property
    def num_satellites(self) -> int:
        return len(self.neighbors)


@dataclass(frozen=True)
class Gateway:
    id: int
    name: str
    latitude_deg: float
    longitude_deg: float
    region: str = ""

    @property
    def site(self) -> GroundSite:
        return GroundSite.from_degrees(self.latitude_deg, self.longitude_deg)


class GeometryError(ValueError):
    pass


# --------------------------------------------------------------------------
# Plane separation

def _plane_normal(pos, vel):
    h = np.cross(pos, vel)
    norm = np.linalg.norm(h, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise GeometryError("zero angular momentum: orbital plane undefined")
    return h / norm


def plane_separation(a_pos, a_vel, b_pos, b_vel) -> float:
    """Acute angle between the orbital planes of two satellites, in [0, pi/2]."""
    na = _plane_normal(np.asarray(a_pos, float), np.asarray(a_vel, float))
    nb = _plane_normal(np.asarray(b_pos, float), np.asarray(b_vel, float))
    return float(math.atan2(np.linalg.norm(np.cross(na, nb)), abs(float(na @ nb))))


def plane_separation_matrix(pos: np.ndarray, vel: np.ndarray) -> np.ndarray:
    n = _plane_normal(pos, vel)
    cross = np.linalg.norm(np.cross(n[:, None, :], n[None, :, :]), axis=-1)
    dot = np.abs(n @ n.T)
    return np.arctan2(cross, dot)


# --------------------------------------------------------------------------
# Neighbors

def distance_matrix(pos: np.ndarray) -> np.ndarray:
    diff = pos[:, None, :] - pos[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def feasible_mask(pos, vel, params: NeighborParams):
    dist = distance_matrix(pos)
    mask = (dist <= params.max_range_km) & (plane_separation_matrix(pos, vel) <= params.max_plane_angle)
    np.fill_diagonal(mask, False)
    return mask, dist


def select_neighbors(pos, vel, params: NeighborParams) -> list[list[int]]:
    """At most M feasible satellites per node, nearest first (ties by id)."""
    pos = np.asarray(pos, float)
    vel = np.asarray(vel, float)
    mask, dist = feasible_mask(pos, vel, params)
    out = []
    ids = np.arange(len(pos))
    for k in range(len(pos)):
        cand = ids[mask[k]]
        order = np.lexsort((cand, dist[k, cand]))
        out.append([int(c) for c in cand[order][:params.max_neighbors]])
    return out


# --------------------------------------------------------------------------
# Gateways

def elevation_sine(sat, site_eci, earth_radius_km=EARTH_RADIUS_KM):
    """Left-hand side of the footprint test; broadcasts over leading axes."""
    sat = np.asarray(sat, float)
    site = np.asarray(site_eci, float)
    diff = sat - site
    num = np.sum(diff * site, axis=-1)
    den = earth_radius_km * np.linalg.norm(diff, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), 1.0)


def in_footprint(sat, site_eci, fp: FootprintParams):
    val = elevation_sine(sat, site_eci, fp.earth_radius_km) >= math.sin(fp.min_elevation)
    return bool(val) if np.ndim(val) == 0 else val


def elevation_angle(sat, site_eci, earth_radius_km=EARTH_RADIUS_KM):
    return np.arcsin(np.clip(elevation_sine(sat, site_eci, earth_radius_km), -1.0, 1.0))


def associate_gateway(sat, sites, fp: FootprintParams):
    """Index of the closest gateway in footprint, or None."""
    sites = np.asarray(sites, float).reshape(-1, 3)
    if len(sites) == 0:
        return None
    ok = np.atleast_1d(in_footprint(np.asarray(sat, float)[None, :], sites, fp))
    if not ok.any():
        return None
    dist = np.linalg.norm(sites - np.asarray(sat, float), axis=1)
    dist = np.where(ok, dist, np.inf)
    # argmin returns the first (lowest id) on ties
    return int(np.argmin(dist))


def build_snapshot(t, pos, vel, gateway_eci, nparams: NeighborParams,
                   fp: FootprintParams) -> TopologySnapshot:
    """pos, vel: (K, 3) at slot t; gateway_eci: (G, 3)."""
    neighbors = select_neighbors(pos, vel, nparams)
    gw = tuple(associate_gateway(p, gateway_eci, fp) for p in pos)
    visible = np.array([g is not None for g in gw], dtype=bool)
    return TopologySnapshot(t, tuple(tuple(n) for n in neighbors), gw, visible)


def gateway_positions(gateways, gmst_angles, earth_radius_km=EARTH_RADIUS_KM) -> np.ndarray:
    """(T, G, 3) ECI gateway positions."""
    ecef = np.array([site_ecef(g.site, earth_radius_km) for g in gateways]).reshape(-1, 3)
    angles = np.asarray(gmst_angles, float)
    return rotate_z(ecef[None, :, :], angles[:, None])


# --------------------------------------------------------------------------
# Gateway files

DATA_DIR = Path(__file__).parent / "data"

GATEWAY_PRESETS = {
    "hybrid": None,
    "asia": {"asia"},
    "europe": {"europe"},
    "north-america": {"north-america"},
}


def load_gateways(path=None) -> list[Gateway]:
    """CSV with columns id,name,latitude,longitude[,region]."""
    path = Path(path) if path else DATA_DIR / "gateways.csv"
    gateways = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            gateways.append(Gateway(
                id=int(row["id"]), name=row["name"],
                latitude_deg=float(row["latitude"]), longitude_deg=float(row["longitude"]),
                region=row.get("region", "").strip()))
    return gateways


def gateway_preset(name: str, gateways=None) -> list[Gateway]:
    key = name.lower().replace("_", "-").replace(" ", "-")
    if key in ("global", "hybrid-global"):
        key = "hybrid"
    if key == "none":
        return []
    if key not in GATEWAY_PRESETS:
        raise GeometryError(f"unknown gateway preset {name!r}; choose from {sorted(GATEWAY_PRESETS)}")
    gateways = load_gateways() if gateways is None else gateways
    regions = GATEWAY_PRESETS[key]
    if regions is None:
        return list(gateways)
    return [g for g in gateways if g.region in regions]
