"""Residual double-Q agent: per-link follow/flip corrections on top of LG-aware backpressure.

One shared network scores every directed link from a fixed-size feature
vector, so the input and output sizes do not depend on the constellation size
or the neighbor count. Action 0 keeps the prior's activation for the link,
action 1 inverts it.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..policies import Decision, PolicyInput, backpressure_scores, full_capacity, lg_bp_scores
from ..queueing import SlotFlows
from .mlp import MLP, Adam
from .replay import ReplayBuffer

FOLLOW, FLIP = 0, 1

FEATURE_NAMES = (
    "q_src", "q_dst", "isl_cap", "lg_cap_dst", "lg_cap_src", "visible_src", "visible_dst",
    "lg_score", "prev_offload_src", "prev_sent_src", "prev_recv_src", "prior_on",
)
FEATURE_DIM = len(FEATURE_NAMES)
PRIORS = ("lg-bp", "bp", "none")


class TrainingDiverged(FloatingPointError):
    def __init__(self, message, diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class RewardWeights:
    mean_weight: float = 1.0
    max_weight: float = 0.5
    discount: float = 0.99

    def __post_init__(self):
        if self.mean_weight <= 0 or self.max_weight <= 0:
            raise ValueError("reward weights must be positive")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError("discount must lie in [0, 1)")


class QueueScale:
    """95th percentile of recently observed queue lengths, floored at 1."""

    def __init__(self, window: int = 500, value: float = 1.0):
        self._recent = deque(maxlen=window)
        self.value = float(value)
        self.frozen = False

    def observe(self, q) -> None:
        if self.frozen:
            return
        self._recent.append(np.asarray(q, float).copy())
        self.value = max(1.0, float(np.percentile(np.concatenate(self._recent), 95)))


def encode_links(inp: PolicyInput, prev_flows: SlotFlows, queue_scale: float, d_isl: float,
                 d_lg: float, lg_bp_weight: float, prior: str = "lg-bp"):
    """Per-link feature matrix ``(L, FEATURE_DIM)`` aligned with ``inp.links``."""
    links = inp.links
    L = len(links)
    if L == 0:
        return np.zeros((0, FEATURE_DIM))
    k, m = links[:, 0], links[:, 1]
    q = np.asarray(inp.q, float) / queue_scale
    lg = np.asarray(inp.lg_caps, float) / d_lg
    vis = np.asarray(inp.topo.visible, float)
    s_lg = lg_bp_scores(inp, lg_bp_weight)
    prior_on = prior_activation(inp, lg_bp_weight, prior)
    feats = np.column_stack([
        q[k], q[m],
        np.asarray(inp.isl_caps, float) / d_isl,
        lg[m], lg[k], vis[k], vis[m],
        s_lg / (queue_scale * d_isl),
        prev_flows.sent_gw[k] / queue_scale,
        prev_flows.sent_isl[k] / queue_scale,
        prev_flows.recv_isl[k] / queue_scale,
        prior_on.astype(float),
    ])
    return np.clip(feats, -50.0, 50.0)


def prior_activation(inp: PolicyInput, lg_bp_weight: float, prior: str = "lg-bp") -> np.ndarray:
    if prior == "lg-bp":
        return lg_bp_scores(inp, lg_bp_weight) > 0
    if prior == "bp":
        return backpressure_scores(inp) > 0
    if prior == "none":
        return np.zeros(len(inp.links), dtype=bool)
    raise ValueError(f"unknown prior {prior!r}; choose from {PRIORS}")


def act(features, qnet: MLP, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """Epsilon-greedy per link; exact Q ties resolve to FOLLOW."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    L = len(features)
    if L == 0:
        return np.zeros(0, dtype=np.int64)
    qv = qnet(features)
    greedy = (qv[:, FLIP] > qv[:, FOLLOW]).astype(np.int64)
    explore = rng.random(L) < epsilon
    random_a = rng.integers(0, 2, size=L)
    return np.where(explore, random_a, greedy)


def residual_decision(inp: PolicyInput, actions, lg_bp_weight: float, prior: str = "lg-bp") -> Decision:
    """Edited prior activation; the clamp priority is the prior's own score."""
    on = prior_activation(inp, lg_bp_weight, prior) ^ (np.asarray(actions) == FLIP)
    priority = backpressure_scores(inp) if prior == "bp" else lg_bp_scores(inp, lg_bp_weight)
    return Decision(np.where(on, full_capacity(inp), 0.0), priority)


def compute_reward(agent_next_q, bp_next_q, w: RewardWeights) -> float:
    qa = np.asarray(agent_next_q, float)
    qb = np.asarray(bp_next_q, float)
    if qa.size == 0:
        return 0.0
    return -(w.mean_weight * (qa.mean() - qb.mean()) + w.max_weight * (qa.max() - qb.max()))


def double_q_targets(rewards, next_features, dones, online: MLP, target: MLP, gamma: float):
    """y = r + gamma * Q_target(s', argmax_a Q_online(s', a)), bootstrap dropped at terminals."""
    rewards = np.asarray(rewards, float)
    if gamma == 0.0:
        return rewards.copy()
    q_online = online(next_features)
    best = np.argmax(q_online, axis=1)  # first index on ties
    q_eval = target(next_features)[np.arange(len(best)), best]
    return rewards + gamma * np.where(np.asarray(dones, bool), 0.0, q_eval)


def td_loss_and_grads(qnet: MLP, features, actions, targets):
    qv, acts = qnet.forward(features, keep=True)
    rows = np.arange(len(actions))
    err = qv[rows, actions] - targets
    loss = float(np.mean(err ** 2))
    grad_out = np.zeros_like(qv)
    grad_out[rows, actions] = 2.0 * err / len(actions)
    return loss, qnet.backward(acts, grad_out)


def train_step(buffer: ReplayBuffer, qnet: MLP, target: MLP, opt: Adam, gamma: float,
               batch_size: int, rng: np.random.Generator) -> float:
    feats, actions, rewards, next_feats, dones = buffer.sample(batch_size, rng)
    y = double_q_targets(rewards, next_feats, dones, qnet, target, gamma)
    loss, grads = td_loss_and_grads(qnet, feats, actions, y)
    if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
        raise TrainingDiverged(f"non-finite TD loss ({loss})", {
            "loss": loss,
            "reward_range": [float(np.min(rewards)), float(np.max(rewards))],
            "target_range": _finite_range(y),
            "param_norms": [float(np.linalg.norm(p)) for p in qnet.params],
            "optimizer_step": opt.t,
        })
    qnet.params = opt.step(qnet.params, grads)
    return loss


def _finite_range(x):
    x = np.asarray(x, float)
    x = x[np.isfinite(x)]
    return [float(x.min()), float(x.max())] if x.size else [None, None]


class ResidualAgent:
    def __init__(self, hidden=(256, 256, 256), lr=1e-4, grad_clip=10.0, buffer_size=100_000,
                 lg_bp_weight=1.0, prior="lg-bp", d_isl=1.0, d_lg=1.0, zero_head=True, seed=0):
        if prior not in PRIORS:
            raise ValueError(f"unknown prior {prior!r}; choose from {PRIORS}")
        rng = np.random.default_rng(seed)
        self.qnet = MLP([FEATURE_DIM, *hidden, 2], rng=rng, zero_head=zero_head)
        self.target = self.qnet.clone()
        self.opt = Adam(self.qnet.params, lr=lr, clip_norm=grad_clip)
        self.buffer = ReplayBuffer(buffer_size, FEATURE_DIM)
        self.scale = QueueScale()
        self.lg_bp_weight = float(lg_bp_weight)
        self.prior = prior
        self.d_isl = float(d_isl)
        self.d_lg = float(d_lg)

    def encode(self, inp: PolicyInput, prev_flows: SlotFlows) -> np.ndarray:
        return encode_links(inp, prev_flows, self.scale.value, self.d_isl, self.d_lg,
                            self.lg_bp_weight, self.prior)

    def act(self, features, epsilon, rng):
        return act(features, self.qnet, epsilon, rng)

    def decision(self, inp: PolicyInput, actions) -> Decision:
        return residual_decision(inp, actions, self.lg_bp_weight, self.prior)

    def sync_target(self) -> None:
        self.target.copy_from(self.qnet)

    def policy(self, epsilon: float = 0.0):
        """Stateful ``policy(inp, rng) -> Decision`` for evaluation runs."""
        prev = {"flows": None}

        def run(inp: PolicyInput, rng) -> Decision:
            flows = prev["flows"] or SlotFlows.zeros(len(inp.q))
            feats = self.encode(inp, flows)
            return self.decision(inp, self.act(feats, epsilon, rng))

        def observe(flows: SlotFlows) -> None:
            prev["flows"] = flows

        run.observe = observe
        return run

    # ------------------------------------------------------------------
    def save(self, path) -> None:
        meta = {"features": list(FEATURE_NAMES), "lg_bp_weight": self.lg_bp_weight,
                "prior": self.prior, "d_isl": self.d_isl, "d_lg": self.d_lg,
                "queue_scale": self.scale.value}
        state = self.qnet.state()
        state["meta"] = np.array(json.dumps(meta, sort_keys=True))
        with open(path, "wb") as fh:
            np.savez(fh, **state)

    @classmethod
    def load(cls, path) -> "ResidualAgent":
        path = Path(path)
        with np.load(path) as data:
            state = {k: data[k] for k in data.files}
        meta = json.loads(str(state.pop("meta")))
        if meta["features"] != list(FEATURE_NAMES):
            raise ValueError(f"{path}: checkpoint feature layout does not match this version")
        agent = cls.__new__(cls)
        agent.qnet = MLP.from_state(state)
        agent.target = agent.qnet.clone()
        agent.opt = Adam(agent.qnet.params)
        agent.buffer = ReplayBuffer(1, FEATURE_DIM)
        agent.scale = QueueScale(value=meta["queue_scale"])
        agent.scale.frozen = True
        agent.lg_bp_weight = meta["lg_bp_weight"]
        agent.prior = meta["prior"]
        agent.d_isl = meta["d_isl"]
        agent.d_lg = meta["d_lg"]
        return agent
