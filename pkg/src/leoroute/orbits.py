"""TLE ingestion, two-body propagation and ground-site ECI positions."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import numpy as np

MU_EARTH = 398600.4418  # km^3/s^2
EARTH_RADIUS_KM = 6371.0
J2 = 1.08262668e-3
J2_REF_RADIUS_KM = 6378.137
SECONDS_PER_DAY = 86400.0

KEPLER_TOL = 1e-12
KEPLER_MAX_ITER = 50


class TleError(ValueError):
    """Malformed two-line element set."""


class KeplerConvergenceError(RuntimeError):
    def __init__(self, satellite_id, slot):
        super().__init__(
            f"Kepler solver did not converge for satellite {satellite_id} at slot {slot}")
        self.satellite_id = satellite_id
        self.slot = slot


@dataclass(frozen=True)
class TleRecord:
    satellite_id: int
    epoch: datetime
    inclination: float  # rad
    raan: float  # rad
    eccentricity: float
    arg_perigee: float  # rad
    mean_anomaly: float  # rad
    mean_motion: float  # rev/day
    name: str = ""

    def __post_init__(self):
        if not 0.0 <= self.eccentricity < 1.0:
            raise TleError(f"eccentricity {self.eccentricity} outside [0, 1)")
        if self.mean_motion <= 0:
            raise TleError(f"mean motion must be positive, got {self.mean_motion}")

    @property
    def period_s(self) -> float:
        return SECONDS_PER_DAY / self.mean_motion

    @property
    def semi_major_axis_km(self) -> float:
        n = 2.0 * math.pi / self.period_s
        return (MU_EARTH / n ** 2) ** (1.0 / 3.0)


@dataclass(frozen=True)
class GroundSite:
    latitude: float  # rad
    longitude: float  # rad
    altitude: float = 0.0  # km

    def __post_init__(self):
        if abs(self.latitude) > math.pi / 2 + 1e-15:
            raise ValueError(f"latitude {self.latitude} outside [-pi/2, pi/2]")
        if not -math.pi <= self.longitude < math.pi:
            raise ValueError(f"longitude {self.longitude} outside [-pi, pi)")

    @classmethod
    def from_degrees(cls, lat_deg, lon_deg, altitude=0.0):
        lon = (lon_deg + 180.0) % 360.0 - 180.0
        return cls(math.radians(lat_deg), math.radians(lon), altitude)


@dataclass(frozen=True)
class TimeGrid:
    t0: datetime
    slot_seconds: float
    num_slots: int

    def __post_init__(self):
        if self.slot_seconds <= 0:
            raise ValueError("slot_seconds must be positive")
        if self.num_slots < 1:
            raise ValueError("num_slots must be >= 1")
        if self.t0.tzinfo is None:
            object.__setattr__(self, "t0", self.t0.replace(tzinfo=timezone.utc))

    def offsets(self) -> np.ndarray:
        """Seconds since t0 for every slot."""
        return np.arange(self.num_slots, dtype=float) * self.slot_seconds

    def time_of(self, t: int) -> datetime:
        return self.t0 + timedelta(seconds=t * self.slot_seconds)


@dataclass(frozen=True)
class OrbitTrack:
    """Propagated ECI states of one satellite, one row per slot."""
    satellite_id: int
    positions: np.ndarray  # (T, 3) km
    velocities: np.ndarray  # (T, 3) km/s


# --------------------------------------------------------------------------
# TLE parsing

def tle_checksum(line: str) -> int:
    total = 0
    for ch in line[:68]:
        if ch.isdigit():
            total += int(ch)
        elif ch == "-":
            total += 1
    return total % 10


def _epoch(year2: int, day: float) -> datetime:
    year = 2000 + year2 if year2 < 57 else 1900 + year2
    return datetime(year, 1, 1, tzinfo=timezone.utc) + timedelta(days=day - 1.0)


def _check_line(line: str, lineno: int, expect: str):
    if len(line) != 69:
        raise TleError(f"line {lineno}: expected 69 characters, got {len(line)}")
    if line[0] != expect:
        raise TleError(f"line {lineno}: expected line number {expect}")
    if not line[68].isdigit() or int(line[68]) != tle_checksum(line):
        raise TleError(f"line {lineno}: checksum mismatch")


def _parse_pair(l1: str, l2: str, lineno: int, name: str) -> TleRecord:
    _check_line(l1, lineno, "1")
    _check_line(l2, lineno + 1, "2")
    try:
        satnum = int(l1[2:7])
        epoch = _epoch(int(l1[18:20]), float(l1[20:32]))
    except ValueError as exc:
        raise TleError(f"line {lineno}: unparsable field ({exc})") from None
    try:
        if int(l2[2:7]) != satnum:
            raise TleError(f"line {lineno + 1}: satellite number differs from line 1")
        rad = math.radians
        return TleRecord(
            satellite_id=satnum,
            epoch=epoch,
            inclination=rad(float(l2[8:16])),
            raan=rad(float(l2[17:25])),
            eccentricity=float("0." + l2[26:33].strip()),
            arg_perigee=rad(float(l2[34:42])),
            mean_anomaly=rad(float(l2[43:51])),
            mean_motion=float(l2[52:63]),
            name=name,
        )
    except ValueError as exc:
        if isinstance(exc, TleError):
            raise
        raise TleError(f"line {lineno + 1}: unparsable field ({exc})") from None


def parse_tle(text: str) -> list[TleRecord]:
    """Parse 2-line or 3-line element sets, in file order."""
    lines = [(i + 1, ln.rstrip("\r\n").rstrip()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, ln) for i, ln in lines if ln.strip()]
    records = []
    idx = 0
    while idx < len(lines):
        lineno, line = lines[idx]
        name = ""
        if not line.startswith("1 "):
            if line.startswith("2 "):
                raise TleError(f"line {lineno}: line 2 without preceding line 1")
            name = line[2:].strip() if line.startswith("0 ") else line.strip()
            idx += 1
            if idx >= len(lines):
                raise TleError(f"line {lineno}: name line without element set")
            lineno, line = lines[idx]
        if idx + 1 >= len(lines):
            raise TleError(f"line {lineno}: truncated element set")
        l2no, l2 = lines[idx + 1]
        if l2no != lineno + 1:
            raise TleError(f"line {lineno + 1}: expected line 2")
        records.append(_parse_pair(line, l2, lineno, name))
        idx += 2
    return records


def load_tle_file(path) -> list[TleRecord]:
    with open(path) as fh:
        return parse_tle(fh.read())


def _exp_field(x: float) -> str:
    if x == 0:
        return " 00000-0"
    sign = "-" if x < 0 else " "
    exp = math.floor(math.log10(abs(x))) + 1
    mant = round(abs(x) / 10.0 ** exp * 1e5)
    if mant >= 100000:
        mant //= 10
        exp += 1
    esign = "-" if exp < 0 else "+"
    return f"{sign}{mant:05d}{esign}{abs(exp)}"


def format_tle(rec: TleRecord, bstar: float = 0.0) -> tuple[str, str]:
    """Render a record as two checksummed TLE lines."""
    ep = rec.epoch.astimezone(timezone.utc)
    start = datetime(ep.year, 1, 1, tzinfo=timezone.utc)
    day = (ep - start).total_seconds() / SECONDS_PER_DAY + 1.0
    deg = math.degrees
    l1 = (f"1 {rec.satellite_id:05d}U 00000A   {ep.year % 100:02d}{day:012.8f} "
          f" .00000000  00000-0 {_exp_field(bstar)} 0  999")
    ecc = f"{rec.eccentricity:.7f}"[2:]
    l2 = (f"2 {rec.satellite_id:05d} {deg(rec.inclination) % 360:8.4f} "
          f"{deg(rec.raan) % 360:8.4f} {ecc} {deg(rec.arg_perigee) % 360:8.4f} "
          f"{deg(rec.mean_anomaly) % 360:8.4f} {rec.mean_motion:11.8f}    1")
    l1 = l1[:68] + str(tle_checksum(l1))
    l2 = l2[:68] + str(tle_checksum(l2))
    return l1, l2


# --------------------------------------------------------------------------
# Propagation

def solve_kepler(mean_anomaly, ecc: float, satellite_id=None, slots=None) -> np.ndarray:
    """Eccentric anomaly from mean anomaly (vectorized Newton, bisection fallback)."""
    M = np.mod(np.atleast_1d(np.asarray(mean_anomaly, dtype=float)), 2.0 * np.pi)
    E = M + ecc * np.sin(M) if ecc < 0.8 else np.full_like(M, np.pi)
    converged = np.zeros(M.shape, dtype=bool)
    for _ in range(KEPLER_MAX_ITER):
        f = E - ecc * np.sin(E) - M
        step = f / (1.0 - ecc * np.cos(E))
        E = E - step
        converged = np.abs(step) < KEPLER_TOL
        if converged.all():
            break
    if not converged.all():
        # f(E) = E - e sin E - M is monotone on [0, 2pi]
        for i in np.flatnonzero(~converged):
            if not math.isfinite(M[i]):
                slot = None if slots is None else int(np.asarray(slots).ravel()[i])
                raise KeplerConvergenceError(satellite_id, slot)
            lo, hi = 0.0, 2.0 * np.pi
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if mid - ecc * math.sin(mid) - M[i] > 0:
                    hi = mid
                else:
                    lo = mid
                if hi - lo < KEPLER_TOL:
                    break
            else:
                slot = None if slots is None else int(np.asarray(slots).ravel()[i])
                raise KeplerConvergenceError(satellite_id, slot)
            E[i] = 0.5 * (lo + hi)
    return E


def _rotation(raan, inc, argp):
    """Perifocal -> ECI rotation matrices; inputs broadcast to (T,)."""
    cO, sO = np.cos(raan), np.sin(raan)
    ci, si = np.cos(inc), np.sin(inc)
    cw, sw = np.cos(argp), np.sin(argp)
    P = np.stack([cO * cw - sO * sw * ci, sO * cw + cO * sw * ci, sw * si], axis=-1)
    Q = np.stack([-cO * sw - sO * cw * ci, -sO * sw + cO * cw * ci, cw * si], axis=-1)
    return P, Q


def elements_to_state(a, ecc, inc, raan, argp, mean_anomaly, satellite_id=None):
    """ECI position/velocity from classical elements (mean anomaly may be an array)."""
    M = np.atleast_1d(np.asarray(mean_anomaly, dtype=float))
    E = solve_kepler(M, ecc, satellite_id, np.arange(M.size))
    cosE, sinE = np.cos(E), np.sin(E)
    x_pf = a * (cosE - ecc)
    y_pf = a * math.sqrt(1.0 - ecc ** 2) * sinE
    n = math.sqrt(MU_EARTH / a ** 3)
    vx_pf = -a * n * sinE / (1.0 - ecc * cosE)
    vy_pf = a * n * math.sqrt(1.0 - ecc ** 2) * cosE / (1.0 - ecc * cosE)
    raan = np.broadcast_to(raan, M.shape)
    argp = np.broadcast_to(argp, M.shape)
    P, Q = _rotation(raan, inc, argp)
    pos = x_pf[:, None] * P + y_pf[:, None] * Q
    vel = vx_pf[:, None] * P + vy_pf[:, None] * Q
    return pos, vel


def _seconds_between(a: datetime, b: datetime) -> float:
    return (a - b).total_seconds()


def propagate(rec: TleRecord, grid: TimeGrid, j2: bool = False) -> OrbitTrack:
    """Two-body propagation of TLE mean elements, optionally with J2 secular drift."""
    dt0 = _seconds_between(grid.t0, rec.epoch)
    if abs(dt0) > 30 * SECONDS_PER_DAY:
        warnings.warn(
            f"satellite {rec.satellite_id}: grid start is {dt0 / SECONDS_PER_DAY:.1f} days "
            "from TLE epoch", stacklevel=2)
    dt = dt0 + grid.offsets()
    a = rec.semi_major_axis_km
    n = math.sqrt(MU_EARTH / a ** 3)
    raan = np.full(dt.shape, rec.raan)
    argp = np.full(dt.shape, rec.arg_perigee)
    if j2:
        p = a * (1.0 - rec.eccentricity ** 2)
        k = n * J2 * (J2_REF_RADIUS_KM / p) ** 2
        ci = math.cos(rec.inclination)
        raan = raan + (-1.5 * k * ci) * dt
        argp = argp + (0.75 * k * (5.0 * ci ** 2 - 1.0)) * dt
    M = rec.mean_anomaly + n * dt
    try:
        pos, vel = elements_to_state(a, rec.eccentricity, rec.inclination, raan, argp, M,
                                     rec.satellite_id)
    except KeplerConvergenceError as exc:
        raise KeplerConvergenceError(rec.satellite_id, exc.slot) from None
    return OrbitTrack(rec.satellite_id, pos, vel)


class KeplerPropagator:
    """Default propagator; swap for any object with the same ``propagate`` method."""

    def __init__(self, j2: bool = False):
        self.j2 = j2

    def propagate(self, rec: TleRecord, grid: TimeGrid) -> OrbitTrack:
        return propagate(rec, grid, j2=self.j2)


def propagate_all(records, grid: TimeGrid, propagator=None):
    """Stack tracks into (K, T, 3) position and velocity arrays."""
    propagator = propagator or KeplerPropagator()
    tracks = [propagator.propagate(r, grid) for r in records]
    pos = np.stack([tr.positions for tr in tracks])
    vel = np.stack([tr.velocities for tr in tracks])
    return pos, vel


# --------------------------------------------------------------------------
# Earth rotation

def julian_date(when: datetime) -> float:
    when = when.astimezone(timezone.utc)
    j2000 = datetime(2000, 1, 1, 12, tzinfo=timezone.utc)
    return 2451545.0 + (when - j2000).total_seconds() / SECONDS_PER_DAY


def gmst(when: datetime) -> float:
    """Greenwich mean sidereal time (rad), IAU 1982 model with UT1 = UTC."""
    jd = julian_date(when)
    tu = (jd - 2451545.0) / 36525.0
    seconds = (67310.54841 + (876600.0 * 3600.0 + 8640184.812866) * tu
               + 0.093104 * tu ** 2 - 6.2e-6 * tu ** 3)
    return math.radians((seconds % SECONDS_PER_DAY) / 240.0) % (2.0 * math.pi)


def gmst_grid(grid: TimeGrid) -> np.ndarray:
    return np.array([gmst(grid.time_of(t)) for t in range(grid.num_slots)])


def site_ecef(site: GroundSite, earth_radius_km: float = EARTH_RADIUS_KM) -> np.ndarray:
    r = earth_radius_km + site.altitude
    cl = math.cos(site.latitude)
    return np.array([r * cl * math.cos(site.longitude),
                     r * cl * math.sin(site.longitude),
                     r * math.sin(site.latitude)])


def rotate_z(vec, angle):
    """Rotate vector(s) about +z by ``angle`` (ECEF -> ECI for angle = GMST)."""
    vec = np.asarray(vec, dtype=float)
    c, s = np.cos(angle), np.sin(angle)
    out = np.empty(np.broadcast_shapes(vec.shape, np.shape(angle) + (3,)))
    out[..., 0] = c * vec[..., 0] - s * vec[..., 1]
    out[..., 1] = s * vec[..., 0] + c * vec[..., 1]
    out[..., 2] = vec[..., 2]
    return out


def ground_site_eci(site: GroundSite, grid: TimeGrid, t: int,
                    earth_radius_km: float = EARTH_RADIUS_KM) -> np.ndarray:
    if not 0 <= t < grid.num_slots:
        raise IndexError(f"slot {t} outside grid of {grid.num_slots} slots")
    return rotate_z(site_ecef(site, earth_radius_km), gmst(grid.time_of(t)))


def eci_to_ecef(vec, gmst_angle):
    return rotate_z(vec, -np.asarray(gmst_angle))
