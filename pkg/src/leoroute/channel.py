"""Link-to-ground and inter-satellite link budgets, shadowed-Rician fading, capacities.

Distance units differ by link on purpose: the ground-link path loss takes the
ECI distance in km, the ISL free-space ratio lambda_c / (4 pi D) takes meters.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import hyp1f1

BOLTZMANN = 1.380649e-23  # J/K


@dataclass(frozen=True)
class LgChannelParams:
    tx_power: float = 10.0  # W
    path_loss_exp: float = 2.0
    noise_var: float = 1e-5  # W
    bandwidth_hz: float = 20e6
    packet_bits: float = 12e6

    def __post_init__(self):
        for name in ("tx_power", "path_loss_exp", "noise_var", "bandwidth_hz", "packet_bits"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def packets_per_unit_rate(self, slot_seconds: float) -> float:
        """B * dt / L_pkt."""
        return self.bandwidth_hz * slot_seconds / self.packet_bits


@dataclass(frozen=True)
class ShadowedRicianParams:
    b0: float = 0.126
    m: float = 10.1
    omega: float = 0.835

    def __post_init__(self):
        if self.b0 <= 0 or self.m <= 0 or self.omega < 0:
            raise ValueError("need b0 > 0, m > 0, omega >= 0")

    @property
    def mean(self) -> float:
        return 2.0 * self.b0 + self.omega


@dataclass(frozen=True)
class IslChannelParams:
    tx_power: float = 5.0  # W
    tx_gain: float = 1000.0
    rx_gain: float = 1000.0
    carrier_wavelength_m: float = 0.0107
    boltzmann: float = BOLTZMANN
    sys_noise_temp: float = 300.0  # K
    isl_bandwidth_hz: float = 20e6
    packet_bits: float = 12e6

    def __post_init__(self):
        for name in ("tx_power", "tx_gain", "rx_gain", "carrier_wavelength_m", "boltzmann",
                     "sys_noise_temp", "isl_bandwidth_hz", "packet_bits"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def packets_per_unit_rate(self, slot_seconds: float) -> float:
        """B_ISL * dt / L_pkt."""
        return self.isl_bandwidth_hz * slot_seconds / self.packet_bits


@dataclass(frozen=True)
class ShadowingTable:
    """Elevation bands (lower edges in degrees) mapped to fading parameters."""
    lower_edges_deg: tuple[float, ...] = (0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0)
    params: tuple[ShadowedRicianParams, ...] = field(
        default_factory=lambda: (ShadowedRicianParams(),) * 9)

    def __post_init__(self):
        if len(self.lower_edges_deg) != len(self.params) or not self.params:
            raise ValueError("need one parameter triple per elevation band")
        if list(self.lower_edges_deg) != sorted(self.lower_edges_deg):
            raise ValueError("band edges must be ascending")

    def lookup(self, elevation_rad: float) -> ShadowedRicianParams:
        i = bisect.bisect_right(self.lower_edges_deg, math.degrees(elevation_rad)) - 1
        return self.params[max(i, 0)]


class ChannelError(ValueError):
    pass


def _distance(a, b) -> float:
    d = float(np.linalg.norm(np.asarray(a, float) - np.asarray(b, float)))
    if d <= 0:
        raise ChannelError("coincident endpoints: distance must be positive")
    return d


def lg_mean_snr(sat, gw, p: LgChannelParams) -> float:
    """P_tx * D^-eta / sigma^2 with D in km."""
    return p.tx_power * _distance(sat, gw) ** (-p.path_loss_exp) / p.noise_var


def sample_fading(p: ShadowedRicianParams, rng: np.random.Generator, size=None):
    """Shadowed-Rician power gain: scatter CN(0, 2 b0) plus Gamma-shadowed LOS."""
    shape = () if size is None else tuple(np.atleast_1d(size).tolist())
    scatter = rng.normal(0.0, math.sqrt(p.b0), size=shape + (2,))
    if p.omega > 0:
        los_power = rng.gamma(p.m, p.omega / p.m, size=shape)
    else:
        los_power = np.zeros(shape)
    phase = rng.uniform(0.0, 2.0 * math.pi, size=shape)
    amp = np.sqrt(los_power)
    re = scatter[..., 0] + amp * np.cos(phase)
    im = scatter[..., 1] + amp * np.sin(phase)
    kappa = re * re + im * im
    return float(kappa) if size is None else kappa


def shadowed_rician_pdf(x, p: ShadowedRicianParams):
    x = np.asarray(x, float)
    b2 = 2.0 * p.b0
    lead = (b2 * p.m / (b2 * p.m + p.omega)) ** p.m
    arg = p.omega * x / (b2 * (b2 * p.m + p.omega))
    return np.where(x >= 0, lead * np.exp(-x / b2) / b2 * hyp1f1(p.m, 1.0, arg), 0.0)


def lg_capacity_packets(mean_snr, kappa, p: LgChannelParams, slot_seconds: float):
    kappa = np.asarray(kappa, float)
    if np.any(kappa < 0):
        raise ChannelError("fading gain must be non-negative")
    out = p.packets_per_unit_rate(slot_seconds) * np.log2(1.0 + kappa * np.asarray(mean_snr, float))
    return float(out) if out.ndim == 0 else out


def isl_snr(a, b, p: IslChannelParams) -> float:
    return float(isl_snr_from_distance(_distance(a, b), p))


def isl_snr_from_distance(d_km, p: IslChannelParams):
    d_m = np.asarray(d_km, float) * 1000.0
    if np.any(d_m <= 0):
        raise ChannelError("distance must be positive")
    fspl = (p.carrier_wavelength_m / (4.0 * math.pi * d_m)) ** 2
    return (p.tx_power * p.tx_gain * p.rx_gain * fspl
            / (p.boltzmann * p.sys_noise_temp * p.isl_bandwidth_hz))


def isl_capacity_packets(snr, p: IslChannelParams, slot_seconds: float):
    snr = np.asarray(snr, float)
    if np.any(snr < 0):
        raise ChannelError("SNR must be non-negative")
    out = p.packets_per_unit_rate(slot_seconds) * np.log2(1.0 + snr)
    return float(out) if out.ndim == 0 else out
