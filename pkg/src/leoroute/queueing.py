"""Slot-level queue bookkeeping: gateway offload, schedule clamping and the queue recursion.

Links are carried as an ``(L, 2)`` integer array of directed ``(k, m)`` pairs;
every per-link quantity is an ``(L,)`` array aligned with it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class QueueInvariantError(RuntimeError):
    """Flows that no feasible schedule could have produced."""


@dataclass(frozen=True)
class QueueState:
    q: np.ndarray
    t: int = 0

    def __post_init__(self):
        q = np.asarray(self.q, dtype=np.int64)
        if np.any(q < 0):
            raise QueueInvariantError("queue lengths must be non-negative")
        object.__setattr__(self, "q", q)


@dataclass(frozen=True)
class LinkSchedule:
    links: np.ndarray  # (L, 2)
    isl_packets: np.ndarray  # (L,) w_{k->m}
    gateway_packets: np.ndarray  # (K,) v_k

    def as_dict(self) -> dict:
        return {(int(k), int(m)): int(w) for (k, m), w in zip(self.links, self.isl_packets)}


@dataclass(frozen=True)
class SlotFlows:
    sent_isl: np.ndarray  # d_k
    recv_isl: np.ndarray  # r_k
    sent_gw: np.ndarray  # v_k
    arrivals: np.ndarray  # u_k

    @classmethod
    def from_schedule(cls, sched: LinkSchedule, arrivals) -> "SlotFlows":
        K = len(sched.gateway_packets)
        links = sched.links.reshape(-1, 2)
        w = sched.isl_packets
        sent = np.bincount(links[:, 0], weights=w, minlength=K).astype(np.int64)
        recv = np.bincount(links[:, 1], weights=w, minlength=K).astype(np.int64)
        return cls(sent, recv, np.asarray(sched.gateway_packets, np.int64),
                   np.asarray(arrivals, np.int64))

    @classmethod
    def zeros(cls, K: int) -> "SlotFlows":
        z = np.zeros(K, dtype=np.int64)
        return cls(z, z, z, z)


def gateway_offload(q_k, visible, capacity_packets):
    """min(Q, floor(C)) when a gateway is visible, else 0. Vectorizes over satellites."""
    q = np.asarray(q_k, dtype=np.int64)
    cap = np.floor(np.maximum(np.asarray(capacity_packets, float), 0.0)).astype(np.int64)
    out = np.where(np.asarray(visible, bool), np.minimum(q, cap), 0)
    return int(out) if out.ndim == 0 else out


def clamp_schedule(raw, q, caps, v, links, scores=None) -> LinkSchedule:
    """Enforce the per-link capacity cap and the per-satellite queue budget.

    Gateway offload ``v`` is served first; the remaining budget goes to the
    outgoing links in descending score order, so the lowest-value links are cut.
    """
    links = np.asarray(links, dtype=np.int64).reshape(-1, 2)
    q = np.asarray(q, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    w = np.minimum(np.maximum(np.asarray(raw, float), 0.0),
                   np.floor(np.maximum(np.asarray(caps, float), 0.0)))
    w = np.floor(w).astype(np.int64)
    if len(links) == 0:
        return LinkSchedule(links, w, v.copy())
    if scores is None:
        scores = np.zeros(len(links))
    scores = np.asarray(scores, float)
    budget = np.maximum(q - v, 0)
    sent = np.bincount(links[:, 0], weights=w, minlength=len(q))
    for k in np.flatnonzero(sent > budget):
        idx = np.flatnonzero(links[:, 0] == k)
        # descending score, ties by ascending neighbor id
        order = idx[np.lexsort((links[idx, 1], -scores[idx]))]
        remaining = int(budget[k])
        for i in order:
            take = min(int(w[i]), remaining)
            w[i] = take
            remaining -= take
    return LinkSchedule(links, w, v.copy())


def check_schedule(sched: LinkSchedule, q, caps) -> None:
    """Raise if the capacity or queue-feasibility constraints are violated."""
    w = sched.isl_packets
    if np.any(w < 0) or np.any(w > np.floor(np.asarray(caps, float))):
        raise QueueInvariantError("ISL packets exceed link capacity")
    flows = SlotFlows.from_schedule(sched, np.zeros(len(q)))
    if np.any(flows.sent_gw + flows.sent_isl > np.asarray(q)):
        raise QueueInvariantError("transmissions exceed queue length")


def step_queues(state: QueueState, flows: SlotFlows) -> QueueState:
    """Q(t+1) = (Q + u + r - v - d)^+ after validating the flow ledger."""
    q = state.q
    for name in ("sent_isl", "recv_isl", "sent_gw", "arrivals"):
        if np.any(getattr(flows, name) < 0):
            raise QueueInvariantError(f"slot {state.t}: negative {name}")
    if flows.sent_isl.sum() != flows.recv_isl.sum():
        raise QueueInvariantError(f"slot {state.t}: ISL sent/received totals differ")
    if np.any(flows.sent_gw + flows.sent_isl > q):
        bad = np.flatnonzero(flows.sent_gw + flows.sent_isl > q)
        raise QueueInvariantError(f"slot {state.t}: infeasible transmissions at satellites {bad.tolist()}")
    nxt = np.maximum(q + flows.arrivals + flows.recv_isl - flows.sent_gw - flows.sent_isl, 0)
    return QueueState(nxt, state.t + 1)
