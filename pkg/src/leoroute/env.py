"""Deterministic scenario precomputation and the per-slot transition.

Everything that does not depend on the seed (orbits, topology, mean SNRs,
ISL capacities, arrival rates) is computed once per configuration in
:class:`Scenario`. Seeded randomness lives in :class:`EpisodeDraws`.

Seed splitting: ``SeedSequence(seed).spawn(2)`` gives the environment stream
(fading, then arrivals, slot-major and in satellite-id order) and the policy
stream (random policy, exploration). Swapping policies therefore never
changes the traffic or fading realization.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry
from .channel import isl_capacity_packets, isl_snr_from_distance, lg_capacity_packets, sample_fading
from .config import RunConfig
from .constellations import builtin_tle_path
from .orbits import KeplerPropagator, eci_to_ecef, gmst_grid, load_tle_file, propagate_all
from .policies import Decision, PolicyInput
from .queueing import QueueState, SlotFlows, clamp_schedule, gateway_offload, step_queues
from .traffic import draw_arrivals, footprint_rate, load_field, local_solar_hour


class SimulationError(RuntimeError):
    def __init__(self, slot, cause):
        super().__init__(f"slot {slot}: {cause}")
        self.slot = slot


@dataclass
class Scenario:
    cfg: RunConfig
    positions: np.ndarray  # (K, T, 3)
    velocities: np.ndarray
    gmst: np.ndarray  # (T,)
    gateways: list
    gateway_eci: np.ndarray  # (T, G, 3)
    snapshots: list
    isl_caps: list  # per slot, (L_t,)
    mean_snr: np.ndarray  # (T, K), 0 where not visible
    fading_band: np.ndarray  # (T, K) index into shadowing table params
    rates: np.ndarray  # (T, K) arrival rates
    d_lg: float
    d_isl: float

    @property
    def num_slots(self) -> int:
        return self.positions.shape[1]

    @property
    def num_satellites(self) -> int:
        return self.positions.shape[0]

    @property
    def visible(self) -> np.ndarray:
        return np.stack([s.visible for s in self.snapshots])


def load_records(cfg: RunConfig):
    src = cfg.constellation.tle_file
    path = builtin_tle_path(src) if src.startswith("builtin:") else cfg.resolve(src)
    records = load_tle_file(path)
    K = cfg.constellation.num_satellites
    if K > len(records):
        raise ValueError(f"{path} has {len(records)} satellites, config asks for {K}")
    return records[:K]


def load_gateway_set(cfg: RunConfig):
    gws = geometry.load_gateways(cfg.resolve(cfg.gateways.file) if cfg.gateways.file else None)
    return geometry.gateway_preset(cfg.gateways.preset, gws)


def build_scenario(cfg: RunConfig) -> Scenario:
    grid = cfg.time.grid()
    records = load_records(cfg)
    pos, vel = propagate_all(records, grid, KeplerPropagator(j2=cfg.constellation.j2))
    angles = gmst_grid(grid)
    fp = cfg.footprint.params()
    nparams = cfg.neighbors.params()
    gateways = load_gateway_set(cfg)
    gw_eci = geometry.gateway_positions(gateways, angles, fp.earth_radius_km)
    lg = cfg.channel.lg()
    isl = cfg.channel.isl()
    table = cfg.channel.shadowing_table()
    dt = grid.slot_seconds
    K, T = pos.shape[0], pos.shape[1]

    field_ = load_field(cfg.traffic.population if cfg.traffic.population == "synthetic"
                        else str(cfg.resolve(cfg.traffic.population)),
                        cfg.traffic.resolution_deg, fp.earth_radius_km)
    field_ = field_.scaled(cfg.traffic.calibration / max(field_.total, 1e-300))
    diurnal = cfg.traffic.diurnal()

    snapshots, caps = [], []
    mean_snr = np.zeros((T, K))
    band = np.zeros((T, K), dtype=np.int64)
    rates = np.zeros((T, K))
    for t in range(T):
        snap = geometry.build_snapshot(t, pos[:, t], vel[:, t], gw_eci[t], nparams, fp)
        snapshots.append(snap)
        links = snap.links
        if len(links):
            d = np.linalg.norm(pos[links[:, 0], t] - pos[links[:, 1], t], axis=1)
            caps.append(isl_capacity_packets(isl_snr_from_distance(d, isl), isl, dt).reshape(-1))
        else:
            caps.append(np.zeros(0))
        utc_hour = (grid.time_of(t).hour + grid.time_of(t).minute / 60.0
                    + grid.time_of(t).second / 3600.0)
        ecef = eci_to_ecef(pos[:, t], angles[t])
        for k in range(K):
            g = snap.gateway_of[k]
            if g is not None:
                site = gw_eci[t, g]
                dist = np.linalg.norm(pos[k, t] - site)
                mean_snr[t, k] = lg.tx_power * dist ** (-lg.path_loss_exp) / lg.noise_var
                elev = float(geometry.elevation_angle(pos[k, t], site, fp.earth_radius_km))
                band[t, k] = table.params.index(table.lookup(elev))
            lon = float(np.arctan2(ecef[k, 1], ecef[k, 0]))
            hour = local_solar_hour(utc_hour, lon)
            rates[t, k] = footprint_rate(pos[k, t], field_, fp, hour, diurnal, angles[t])
    return Scenario(cfg, pos, vel, angles, gateways, gw_eci, snapshots, caps, mean_snr, band,
                    rates, lg.packets_per_unit_rate(dt), isl.packets_per_unit_rate(dt))


# --------------------------------------------------------------------------

def split_seed(seed: int):
    env_ss, pol_ss = np.random.SeedSequence(int(seed)).spawn(2)
    return np.random.default_rng(env_ss), np.random.default_rng(pol_ss)


@dataclass(frozen=True)
class EpisodeDraws:
    kappa: np.ndarray  # (T, K) fading gains
    arrivals: np.ndarray  # (T, K) packets
    lg_caps: np.ndarray  # (T, K) ground capacity in packets, 0 when no gateway


def draw_episode(scn: Scenario, rng: np.random.Generator) -> EpisodeDraws:
    T, K = scn.num_slots, scn.num_satellites
    table = scn.cfg.channel.shadowing_table()
    kappa = np.zeros((T, K))
    arrivals = np.zeros((T, K), dtype=np.int64)
    for t in range(T):
        for k in range(K):
            kappa[t, k] = sample_fading(table.params[scn.fading_band[t, k]], rng)
        for k in range(K):
            arrivals[t, k] = draw_arrivals(float(scn.rates[t, k]), rng)
    lg_caps = np.where(scn.visible,
                       lg_capacity_packets(scn.mean_snr, kappa, scn.cfg.channel.lg(),
                                           scn.cfg.time.slot_seconds), 0.0)
    return EpisodeDraws(kappa, arrivals, lg_caps)


def policy_input(scn: Scenario, draws: EpisodeDraws, t: int, q) -> PolicyInput:
    return PolicyInput(np.asarray(q), scn.snapshots[t], scn.isl_caps[t], draws.lg_caps[t])


def transition(scn: Scenario, draws: EpisodeDraws, t: int, q, decision: Decision):
    """Apply one slot: clamp, gateway offload, queue recursion. Returns (q_next, flows)."""
    snap = scn.snapshots[t]
    q = np.asarray(q, dtype=np.int64)
    v = gateway_offload(q, snap.visible, draws.lg_caps[t])
    sched = clamp_schedule(decision.demand, q, scn.isl_caps[t], v, snap.links, decision.priority)
    flows = SlotFlows.from_schedule(sched, draws.arrivals[t])
    nxt = step_queues(QueueState(q, t), flows)
    return nxt.q, flows
