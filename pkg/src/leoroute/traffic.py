"""Population-driven packet arrivals: footprint-integrated intensity, diurnal modulation, Poisson draws."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .geometry import FootprintParams, elevation_sine
from .orbits import rotate_z

POISSON_INVERSION_MAX = 30.0


@dataclass(frozen=True)
class DiurnalParams:
    amplitude: float = 0.3
    baseline: float = 1.0
    peak_phase_hours: float = 14.0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        if not self.baseline > self.amplitude:
            raise ValueError("baseline must exceed amplitude so the modulation stays positive")


@dataclass(eq=False)
class TrafficField:
    """Intensity per grid cell (packets per slot at unit modulation)."""
    lat_edges: np.ndarray
    lon_edges: np.ndarray
    intensity: np.ndarray  # (n_lat, n_lon)
    earth_radius_km: float = 6371.0

    def __post_init__(self):
        self.lat_edges = np.asarray(self.lat_edges, float)
        self.lon_edges = np.asarray(self.lon_edges, float)
        self.intensity = np.asarray(self.intensity, float)
        if self.intensity.shape != (len(self.lat_edges) - 1, len(self.lon_edges) - 1):
            raise ValueError("intensity shape does not match the grid edges")
        if np.any(self.intensity < 0) or not np.all(np.isfinite(self.intensity)):
            raise ValueError("intensity must be finite and non-negative")
        if not (np.isclose(self.lat_edges[0], -90) and np.isclose(self.lat_edges[-1], 90)
                and np.isclose(self.lon_edges[0], -180) and np.isclose(self.lon_edges[-1], 180)):
            raise ValueError("grid must cover [-90, 90] x [-180, 180]")

    @cached_property
    def active_cells(self):
        """ECEF centers and weights of the cells with positive intensity."""
        lat_c = np.radians(0.5 * (self.lat_edges[:-1] + self.lat_edges[1:]))
        lon_c = np.radians(0.5 * (self.lon_edges[:-1] + self.lon_edges[1:]))
        lat, lon = np.meshgrid(lat_c, lon_c, indexing="ij")
        keep = self.intensity > 0
        r = self.earth_radius_km
        xyz = np.stack([r * np.cos(lat) * np.cos(lon), r * np.cos(lat) * np.sin(lon),
                        r * np.sin(lat)], axis=-1)
        return xyz[keep], self.intensity[keep]

    def scaled(self, factor: float) -> "TrafficField":
        return TrafficField(self.lat_edges, self.lon_edges, self.intensity * factor,
                            self.earth_radius_km)

    @property
    def total(self) -> float:
        return float(self.intensity.sum())


def diurnal_factor(hour, p: DiurnalParams):
    return p.amplitude * np.sin(2.0 * np.pi * (np.asarray(hour, float) - p.peak_phase_hours) / 24.0) + p.baseline


def local_solar_hour(utc_hour: float, longitude_rad: float) -> float:
    return (utc_hour + math.degrees(longitude_rad) / 15.0) % 24.0


def footprint_rate(sat, fld: TrafficField, fp: FootprintParams, hour: float,
                   p: DiurnalParams = DiurnalParams(), gmst: float = 0.0) -> float:
    """Diurnal factor times the summed intensity of cells whose centers are in the footprint.

    ``sat`` is in ECI; ``gmst`` rotates it into the Earth-fixed grid frame.
    """
    sat_ecef = rotate_z(np.asarray(sat, float), -gmst)
    xyz, weights = fld.active_cells
    if len(weights) == 0:
        return 0.0
    inside = elevation_sine(sat_ecef, xyz, fp.earth_radius_km) >= math.sin(fp.min_elevation)
    return float(diurnal_factor(hour, p) * weights[inside].sum())


# --------------------------------------------------------------------------
# Poisson sampling

def _poisson_inversion(lam: float, rng: np.random.Generator) -> int:
    u = rng.random()
    prob = math.exp(-lam)
    cdf = prob
    k = 0
    while u > cdf:
        k += 1
        prob *= lam / k
        cdf += prob
        if prob == 0.0 and k > lam:
            break
    return k


def _poisson_ptrs(lam: float, rng: np.random.Generator) -> int:
    """Hormann's transformed rejection with squeeze."""
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        U = rng.random() - 0.5
        V = rng.random()
        us = 0.5 - abs(U)
        k = math.floor((2.0 * a / us + b) * U + lam + 0.43)
        if us >= 0.07 and V <= vr:
            return k
        if k < 0 or (us < 0.013 and V > us):
            continue
        if (math.log(V) + math.log(invalpha) - math.log(a / (us * us) + b)
                <= -lam + k * loglam - math.lgamma(k + 1)):
            return k


def draw_arrivals(lam: float, rng: np.random.Generator) -> int:
    if lam < 0 or not math.isfinite(lam):
        raise ValueError(f"arrival rate must be finite and >= 0, got {lam}")
    if lam == 0:
        return 0
    if lam < POISSON_INVERSION_MAX:
        return _poisson_inversion(lam, rng)
    return _poisson_ptrs(lam, rng)


# --------------------------------------------------------------------------
# Grid files and the built-in synthetic field

def load_grid(path, earth_radius_km: float = 6371.0) -> TrafficField:
    """Header ``n_lat n_lon lat_min lat_max lon_min lon_max``, then row-major values."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 6:
            raise ValueError(f"{path}: header needs 6 fields, got {len(header)}")
        n_lat, n_lon = int(header[0]), int(header[1])
        lat0, lat1, lon0, lon1 = map(float, header[2:])
        values = np.loadtxt(fh, ndmin=1).ravel()
    if values.size != n_lat * n_lon:
        raise ValueError(f"{path}: expected {n_lat * n_lon} values, got {values.size}")
    return TrafficField(np.linspace(lat0, lat1, n_lat + 1), np.linspace(lon0, lon1, n_lon + 1),
                        values.reshape(n_lat, n_lon), earth_radius_km)


def save_grid(fld: TrafficField, path) -> None:
    n_lat, n_lon = fld.intensity.shape
    with open(path, "w") as fh:
        fh.write(f"{n_lat} {n_lon} {fld.lat_edges[0]:g} {fld.lat_edges[-1]:g} "
                 f"{fld.lon_edges[0]:g} {fld.lon_edges[-1]:g}\n")
        np.savetxt(fh, fld.intensity, fmt="%.6g")


# (lat, lon, population in millions, spread in degrees)
POPULATION_CENTERS = [
    (35.7, 139.7, 37.0, 2.0), (28.6, 77.2, 31.0, 2.5), (31.2, 121.5, 27.0, 2.0),
    (23.1, 113.3, 25.0, 2.0), (19.1, 72.9, 21.0, 2.0), (-23.5, -46.6, 22.0, 2.0),
    (19.4, -99.1, 22.0, 2.0), (30.0, 31.2, 21.0, 1.5), (39.9, 116.4, 20.0, 2.0),
    (23.8, 90.4, 22.0, 2.0), (34.7, 135.5, 19.0, 1.5), (40.7, -74.0, 19.0, 2.0),
    (24.9, 67.0, 16.0, 1.5), (-34.6, -58.4, 15.0, 1.5), (22.6, 88.4, 15.0, 2.0),
    (41.0, 29.0, 15.0, 1.5), (6.5, 3.4, 15.0, 2.0), (14.6, 121.0, 14.0, 1.5),
    (-6.2, 106.8, 11.0, 2.0), (55.8, 37.6, 12.0, 2.0), (34.1, -118.2, 12.0, 2.0),
    (51.5, -0.1, 9.0, 1.5), (48.9, 2.4, 11.0, 1.5), (37.6, 127.0, 10.0, 1.5),
    (-4.3, 15.3, 14.0, 2.0), (13.8, 100.5, 10.0, 1.5), (41.9, -87.6, 9.0, 1.5),
    (50.5, 8.0, 25.0, 4.0), (-1.3, 36.8, 5.0, 2.0), (-33.9, 151.2, 5.0, 1.5),
    (25.0, 55.3, 3.0, 1.0), (1.35, 103.8, 6.0, 1.0), (3.1, 101.7, 8.0, 1.5),
]


def synthetic_population_field(resolution_deg: float = 1.0, total: float = 1.0,
                               earth_radius_km: float = 6371.0) -> TrafficField:
    """Gaussian population blobs around major metropolitan areas, normalized to ``total``."""
    lat_edges = np.arange(-90.0, 90.0 + 1e-9, resolution_deg)
    lon_edges = np.arange(-180.0, 180.0 + 1e-9, resolution_deg)
    lat_c = np.radians(0.5 * (lat_edges[:-1] + lat_edges[1:]))
    lon_c = np.radians(0.5 * (lon_edges[:-1] + lon_edges[1:]))
    lat, lon = np.meshgrid(lat_c, lon_c, indexing="ij")
    dens = np.zeros(lat.shape)
    for clat, clon, pop, spread in POPULATION_CENTERS:
        clat, clon = math.radians(clat), math.radians(clon)
        cosd = (np.sin(lat) * math.sin(clat)
                + np.cos(lat) * math.cos(clat) * np.cos(lon - clon))
        ang = np.degrees(np.arccos(np.clip(cosd, -1.0, 1.0)))
        dens += pop * np.exp(-0.5 * (ang / spread) ** 2)
    dens[dens < 1e-4 * dens.max()] = 0.0
    dens *= total / dens.sum()
    return TrafficField(lat_edges, lon_edges, dens, earth_radius_km)


def load_field(source: str | Path | None, resolution_deg: float = 1.0,
               earth_radius_km: float = 6371.0) -> TrafficField:
    if source in (None, "", "synthetic", "builtin:synthetic"):
        return synthetic_population_field(resolution_deg, earth_radius_km=earth_radius_km)
    return load_grid(source, earth_radius_km)
