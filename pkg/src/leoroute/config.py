"""Run configuration: dataclasses mirroring the YAML sections, with strict key checking."""
from __future__ import annotations

import copy
import dataclasses
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import yaml

from .channel import IslChannelParams, LgChannelParams, ShadowedRicianParams, ShadowingTable
from .geometry import FootprintParams, NeighborParams
from .orbits import TimeGrid
from .traffic import DiurnalParams


class ConfigError(ValueError):
    pass


@dataclass
class TimeConfig:
    t0: str = "2025-01-01T00:00:00+00:00"
    slot_seconds: float = 60.0
    num_slots: int = 95

    def grid(self) -> TimeGrid:
        t0 = datetime.fromisoformat(self.t0.replace("Z", "+00:00"))
        if t0.tzinfo is None:
            t0 = t0.replace(tzinfo=timezone.utc)
        return TimeGrid(t0, float(self.slot_seconds), int(self.num_slots))


@dataclass
class ConstellationConfig:
    tle_file: str = "builtin:starlink"
    num_satellites: int = 10
    j2: bool = False


@dataclass
class NeighborConfig:
    max_neighbors: int = 4
    max_range_km: float = 5000.0
    max_plane_angle_deg: float = 40.0

    def params(self) -> NeighborParams:
        return NeighborParams(int(self.max_neighbors), float(self.max_range_km),
                              math.radians(self.max_plane_angle_deg))


@dataclass
class FootprintConfig:
    min_elevation_deg: float = 25.0
    earth_radius_km: float = 6371.0

    def params(self) -> FootprintParams:
        return FootprintParams(math.radians(self.min_elevation_deg), float(self.earth_radius_km))


@dataclass
class ShadowingBand:
    min_elevation_deg: float
    b0: float = 0.126
    m: float = 10.1
    omega: float = 0.835


def _default_bands():
    return [ShadowingBand(float(e)) for e in range(0, 90, 10)]


@dataclass
class ChannelConfig:
    """Ground-link distances enter in km, ISL distances in meters (see leoroute.channel)."""
    packet_bits: float = 1e6
    lg_tx_power_w: float = 10.0
    lg_path_loss_exp: float = 2.0
    lg_noise_var_w: float = 1e-5
    lg_bandwidth_hz: float = 1e6
    isl_tx_power_w: float = 5.0
    isl_gain_tx: float = 1000.0
    isl_gain_rx: float = 1000.0
    isl_wavelength_m: float = 0.0107
    isl_noise_temp_k: float = 300.0
    isl_bandwidth_hz: float = 1e6
    shadowing: list[ShadowingBand] = field(default_factory=_default_bands)

    def lg(self) -> LgChannelParams:
        return LgChannelParams(self.lg_tx_power_w, self.lg_path_loss_exp, self.lg_noise_var_w,
                               self.lg_bandwidth_hz, self.packet_bits)

    def isl(self) -> IslChannelParams:
        return IslChannelParams(tx_power=self.isl_tx_power_w, tx_gain=self.isl_gain_tx,
                                rx_gain=self.isl_gain_rx,
                                carrier_wavelength_m=self.isl_wavelength_m,
                                sys_noise_temp=self.isl_noise_temp_k,
                                isl_bandwidth_hz=self.isl_bandwidth_hz,
                                packet_bits=self.packet_bits)

    def shadowing_table(self) -> ShadowingTable:
        bands = sorted(self.shadowing, key=lambda b: b.min_elevation_deg)
        return ShadowingTable(tuple(b.min_elevation_deg for b in bands),
                              tuple(ShadowedRicianParams(b.b0, b.m, b.omega) for b in bands))


@dataclass
class TrafficConfig:
    population: str = "synthetic"
    resolution_deg: float = 1.0
    calibration: float = 1000.0  # packets/slot over the whole grid at unit modulation
    diurnal_amplitude: float = 0.3
    diurnal_baseline: float = 1.0
    diurnal_peak_hour: float = 14.0

    def diurnal(self) -> DiurnalParams:
        return DiurnalParams(self.diurnal_amplitude, self.diurnal_baseline, self.diurnal_peak_hour)


@dataclass
class PolicyConfig:
    name: str = "lg-bp"
    lg_bp_weight: float = 1.0
    p_activate: float = 0.5
    checkpoint: str | None = None


@dataclass
class RLConfig:
    episodes: int = 100
    hidden: list[int] = field(default_factory=lambda: [256, 256, 256])
    learning_rate: float = 1e-4
    batch_size: int = 256
    buffer_size: int = 100_000
    gamma: float = 0.99
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_fraction: float = 0.5
    target_sync: int = 1000
    train_every: int = 1
    updates_per_step: int = 1
    warmup: int = 1000
    grad_clip: float = 10.0
    mean_weight: float = 1.0
    max_weight: float = 0.5
    reward_scale: float = 1.0
    prior: str = "lg-bp"
    counterfactual: str = "trajectory"
    reward_mode: str = "level"
    train_seed: int = 1000
    train_seed_count: int = 1
    zero_init_head: bool = True


@dataclass
class GatewayConfig:
    preset: str = "hybrid"
    file: str | None = None


@dataclass
class RunConfig:
    time: TimeConfig = field(default_factory=TimeConfig)
    constellation: ConstellationConfig = field(default_factory=ConstellationConfig)
    neighbors: NeighborConfig = field(default_factory=NeighborConfig)
    footprint: FootprintConfig = field(default_factory=FootprintConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    gateways: GatewayConfig = field(default_factory=GatewayConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    rl: RLConfig = field(default_factory=RLConfig)
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    output_dir: str = "runs/default"
    base_dir: str = field(default=".", repr=False, compare=False)

    def validate(self) -> "RunConfig":
        if self.constellation.num_satellites < 1:
            raise ConfigError("constellation.num_satellites must be >= 1")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        try:
            self.time.grid()
            self.neighbors.params()
            self.footprint.params()
            self.channel.lg()
            self.channel.isl()
            self.channel.shadowing_table()
            self.traffic.diurnal()
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from None
        if self.traffic.calibration < 0:
            raise ConfigError("traffic.calibration must be >= 0")
        if self.rl.counterfactual not in ("trajectory", "one-step"):
            raise ConfigError("rl.counterfactual must be 'trajectory' or 'one-step'")
        if self.rl.reward_mode not in ("level", "increment"):
            raise ConfigError("rl.reward_mode must be 'level' or 'increment'")
        if self.rl.prior not in ("lg-bp", "bp", "none"):
            raise ConfigError("rl.prior must be one of lg-bp, bp, none")
        if self.rl.episodes < 1 or self.rl.batch_size < 1 or self.rl.buffer_size < 1:
            raise ConfigError("rl.episodes, rl.batch_size and rl.buffer_size must be >= 1")
        if not 0.0 <= self.rl.gamma < 1.0:
            raise ConfigError("rl.gamma must lie in [0, 1)")
        from .geometry import gateway_preset
        try:
            gateway_preset(self.gateways.preset, [])
        except ValueError as exc:
            raise ConfigError(f"gateways.preset: {exc}") from None
        if self.gateways.file and not self.resolve(self.gateways.file).exists():
            raise ConfigError(f"gateways.file: {self.gateways.file} does not exist")
        for name in ("tle_file",):
            path = getattr(self.constellation, name)
            if not path.startswith("builtin:") and not self.resolve(path).exists():
                raise ConfigError(f"constellation.{name}: {path} does not exist")
        return self

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def replace(self, **sections) -> "RunConfig":
        """Copy with dotted overrides, e.g. ``replace(**{"neighbors.max_neighbors": 2})``."""
        cfg = copy.deepcopy(self)
        for key, value in sections.items():
            set_dotted(cfg, key, value)
        return cfg

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("base_dir")
        return d


# --------------------------------------------------------------------------

def _build(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        sub = _SECTION_TYPES.get((cls, name))
        if sub is not None:
            if isinstance(value, list):
                kwargs[name] = [_build(sub, v, f"{where}.{name}[{i}]") for i, v in enumerate(value)]
            else:
                kwargs[name] = _build(sub, value, f"{where}.{name}")
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


_SECTION_TYPES = {
    (RunConfig, "time"): TimeConfig,
    (RunConfig, "constellation"): ConstellationConfig,
    (RunConfig, "neighbors"): NeighborConfig,
    (RunConfig, "footprint"): FootprintConfig,
    (RunConfig, "channel"): ChannelConfig,
    (RunConfig, "traffic"): TrafficConfig,
    (RunConfig, "gateways"): GatewayConfig,
    (RunConfig, "policy"): PolicyConfig,
    (RunConfig, "rl"): RLConfig,
    (ChannelConfig, "shadowing"): ShadowingBand,
}


def config_from_dict(data: dict, base_dir=".") -> RunConfig:
    data = dict(data or {})
    cfg = _build(RunConfig, data, "config")
    cfg.base_dir = str(base_dir)
    cfg.seeds = [int(s) for s in cfg.seeds]
    return cfg.validate()


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    return config_from_dict(data, base_dir=path.parent)


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True, default_flow_style=False)


def set_dotted(cfg, key: str, value) -> None:
    obj = cfg
    parts = key.split(".")
    for part in parts[:-1]:
        if not hasattr(obj, part):
            raise ConfigError(f"unknown config section {key!r}")
        obj = getattr(obj, part)
    if not hasattr(obj, parts[-1]):
        raise ConfigError(f"unknown config key {key!r}")
    setattr(obj, parts[-1], value)
