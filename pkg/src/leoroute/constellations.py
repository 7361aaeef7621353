"""Synthetic Walker-shell element sets used as the shipped constellation fixtures."""
from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .orbits import MU_EARTH, SECONDS_PER_DAY, TleRecord, format_tle

DATA_DIR = Path(__file__).parent / "data"
FIXTURE_EPOCH = datetime(2025, 1, 1, tzinfo=timezone.utc)


@dataclass(frozen=True)
class Shell:
    name: str
    altitude_km: float
    inclination_deg: float
    planes: int  # planes in the full shell (sets RAAN spacing)
    per_plane: int
    phasing: int  # Walker F
    raan_span_deg: float = 360.0
    used_planes: int = 4
    first_id: int = 70000


SHELLS = {
    "starlink": Shell("STARLINK", 550.0, 53.0, 72, 22, 17, used_planes=4, first_id=71000),
    "iridium": Shell("IRIDIUM", 780.0, 86.4, 6, 11, 2, raan_span_deg=180.0, used_planes=3,
                     first_id=72000),
    "oneweb": Shell("ONEWEB", 1200.0, 87.9, 18, 36, 1, raan_span_deg=180.0, used_planes=3,
                    first_id=73000),
}


def mean_motion_for_altitude(alt_km: float, earth_radius_km: float = 6371.0) -> float:
    a = earth_radius_km + alt_km
    n = math.sqrt(MU_EARTH / a ** 3)
    return n * SECONDS_PER_DAY / (2.0 * math.pi)


def walker_records(shell: Shell, epoch: datetime = FIXTURE_EPOCH) -> list[TleRecord]:
    """A contiguous patch of ``used_planes`` adjacent planes.

    Satellites are interleaved slot-major across planes, so any prefix of the
    list is a spatially compact cluster (the K-sweep takes prefixes).
    """
    mm = round(mean_motion_for_altitude(shell.altitude_km), 8)
    total = shell.planes * shell.per_plane
    recs = []
    for s in range(shell.per_plane):
        for p in range(shell.used_planes):
            raan = shell.raan_span_deg * p / shell.planes
            anomaly = 360.0 * s / shell.per_plane + 360.0 * shell.phasing * p / total
            sid = shell.first_id + p * 100 + s
            recs.append(TleRecord(
                satellite_id=sid, epoch=epoch,
                inclination=math.radians(shell.inclination_deg),
                raan=math.radians(round(raan % 360.0, 4)),
                eccentricity=0.0001,
                arg_perigee=0.0,
                mean_anomaly=math.radians(round(anomaly % 360.0, 4)),
                mean_motion=mm,
                name=f"{shell.name}-P{p:02d}S{s:02d}"))
    return recs


def write_tle_file(records, path) -> None:
    with open(path, "w") as fh:
        for r in records:
            l1, l2 = format_tle(r)
            fh.write(f"{r.name}\n{l1}\n{l2}\n")


def builtin_tle_path(name: str) -> Path:
    key = name.split(":", 1)[-1].lower()
    if key not in SHELLS:
        raise KeyError(f"unknown built-in constellation {name!r}; choose from {sorted(SHELLS)}")
    return DATA_DIR / f"{key}.tle"
