"""Scheduling policies. Each maps a slot's observable state to per-link packet demands."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import TopologySnapshot


@dataclass(frozen=True)
class PolicyInput:
    q: np.ndarray  # (K,) queue lengths
    topo: TopologySnapshot
    isl_caps: np.ndarray  # (L,) aligned with topo.links
    lg_caps: np.ndarray  # (K,) 0 where no gateway is visible

    def __post_init__(self):
        if len(self.isl_caps) != len(self.topo.links):
            raise ValueError("isl_caps must align with topo.links")
        if np.any(np.asarray(self.isl_caps) < 0) or np.any(np.asarray(self.lg_caps) < 0):
            raise ValueError("capacities must be non-negative")

    @property
    def links(self) -> np.ndarray:
        return self.topo.links


@dataclass(frozen=True)
class Decision:
    """Desired packets per link, plus the priority clamp_schedule uses when cutting."""
    demand: np.ndarray
    priority: np.ndarray


def full_capacity(inp: PolicyInput) -> np.ndarray:
    return np.floor(np.asarray(inp.isl_caps, float))


def backpressure_scores(inp: PolicyInput) -> np.ndarray:
    """(Q_k - Q_m) * C_isl per directed link."""
    links = inp.links
    q = np.asarray(inp.q, float)
    return (q[links[:, 0]] - q[links[:, 1]]) * np.asarray(inp.isl_caps, float)


def lg_bp_scores(inp: PolicyInput, weight: float) -> np.ndarray:
    """Backpressure score plus ``weight`` times the receiving satellite's ground capacity."""
    if not np.isfinite(weight):
        raise ValueError("LG-BP weight must be finite")
    return backpressure_scores(inp) + weight * np.asarray(inp.lg_caps, float)[inp.links[:, 1]]


def activate(inp: PolicyInput, on: np.ndarray, priority: np.ndarray) -> Decision:
    return Decision(np.where(on, full_capacity(inp), 0.0), priority)


def backpressure_schedule(inp: PolicyInput, rng=None) -> Decision:
    s = backpressure_scores(inp)
    return activate(inp, s > 0, s)


def lg_backpressure_schedule(inp: PolicyInput, weight: float = 1.0, rng=None) -> Decision:
    s = lg_bp_scores(inp, weight)
    return activate(inp, s > 0, s)


def maxweight_schedule(inp: PolicyInput, rng=None) -> Decision:
    """Each satellite serves its single downhill link maximizing Q_k * C (ties by lower id)."""
    links = inp.links
    q = np.asarray(inp.q, float)
    weight = q[links[:, 0]] * np.asarray(inp.isl_caps, float)
    downhill = q[links[:, 0]] > q[links[:, 1]]
    on = np.zeros(len(links), dtype=bool)
    for k in np.unique(links[:, 0]):
        idx = np.flatnonzero((links[:, 0] == k) & downhill)
        if len(idx) == 0:
            continue
        best = idx[np.lexsort((links[idx, 1], -weight[idx]))[0]]
        on[best] = True
    return activate(inp, on, weight)


def equalize_schedule(inp: PolicyInput, rng=None) -> Decision:
    """Most congested satellite sends half the differential to its least-loaded neighbor."""
    links = inp.links
    demand = np.zeros(len(links))
    q = np.asarray(inp.q, dtype=np.int64)
    if len(links) == 0 or len(q) == 0:
        return Decision(demand, demand.copy())
    k = int(np.argmax(q))
    idx = np.flatnonzero(links[:, 0] == k)
    if len(idx) == 0:
        return Decision(demand, demand.copy())
    i = idx[np.lexsort((links[idx, 1], q[links[idx, 1]]))[0]]
    m = links[i, 1]
    amount = min(int(np.floor(inp.isl_caps[i])), int((q[k] - q[m]) // 2))
    if amount > 0:
        demand[i] = amount
    return Decision(demand, demand.copy())


def no_isl_schedule(inp: PolicyInput, rng=None) -> Decision:
    z = np.zeros(len(inp.links))
    return Decision(z, z.copy())


def random_schedule(inp: PolicyInput, rng: np.random.Generator, p_activate: float = 0.5) -> Decision:
    if not 0.0 <= p_activate <= 1.0:
        raise ValueError("p_activate must lie in [0, 1]")
    on = rng.random(len(inp.links)) < p_activate
    return activate(inp, on, backpressure_scores(inp))


POLICY_NAMES = ("bp", "lg-bp", "maxweight", "equalize", "no-isl", "random", "rl-residual")


def make_policy(name: str, lg_bp_weight: float = 1.0, p_activate: float = 0.5):
    """Return ``policy(inp, rng) -> Decision`` for a heuristic policy name."""
    if name == "bp":
        return backpressure_schedule
    if name == "lg-bp":
        return lambda inp, rng=None: lg_backpressure_schedule(inp, lg_bp_weight)
    if name == "maxweight":
        return maxweight_schedule
    if name == "equalize":
        return equalize_schedule
    if name == "no-isl":
        return no_isl_schedule
    if name == "random":
        return lambda inp, rng: random_schedule(inp, rng, p_activate)
    if name == "rl-residual":
        raise ValueError("rl-residual needs a trained agent; see leoroute.rl")
    raise ValueError(f"unknown policy {name!r}; choose from {', '.join(POLICY_NAMES)}")
