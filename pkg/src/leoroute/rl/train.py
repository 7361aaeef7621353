"""Episode loop for the residual agent."""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass

import numpy as np

from ..config import RunConfig
from ..env import Scenario, build_scenario, draw_episode, policy_input, split_seed, transition
from ..policies import backpressure_schedule
from ..queueing import SlotFlows
from .agent import ResidualAgent, RewardWeights, compute_reward, train_step

log = logging.getLogger(__name__)


@dataclass
class EpisodeLog:
    episode: int
    reward: float
    epsilon: float
    loss_mean: float
    loss_max: float
    mean_queue: float
    updates: int


def epsilon_at(step: int, total: int, start: float, end: float, fraction: float) -> float:
    horizon = max(1, int(fraction * total))
    frac = min(1.0, step / horizon)
    return start + frac * (end - start)


def make_agent(cfg: RunConfig, scn: Scenario) -> ResidualAgent:
    hp = cfg.rl
    return ResidualAgent(hidden=tuple(hp.hidden), lr=hp.learning_rate, grad_clip=hp.grad_clip,
                         buffer_size=hp.buffer_size, lg_bp_weight=cfg.policy.lg_bp_weight,
                         prior=hp.prior, d_isl=scn.d_isl, d_lg=scn.d_lg,
                         zero_head=hp.zero_init_head, seed=hp.train_seed)


def _link_index(links):
    return {(int(a), int(b)): i for i, (a, b) in enumerate(links)}


def train(cfg: RunConfig, scenario: Scenario | None = None, agent: ResidualAgent | None = None,
          progress=None):
    """Train on rollouts cycling through ``rl.train_seed_count`` realizations.

    Episode ``e`` replays the environment draws of seed
    ``rl.train_seed + e % rl.train_seed_count``.

    The reward compares the agent's next queues with backpressure on the same
    slot draws. With ``rl.counterfactual == "trajectory"`` the backpressure
    queues evolve as a paired shadow run; with ``"one-step"`` backpressure is
    replayed from the agent's own state each slot, which leaves only the
    max-queue term informative because ISL receptions count from the next slot.
    ``rl.reward_mode == "increment"`` stores the change of that reward from the
    previous slot instead of its level; the logged episode reward is always
    the level sum.

    Returns ``(agent, history)``; ``history`` holds one :class:`EpisodeLog` per episode.
    """
    hp = cfg.rl
    scn = scenario or build_scenario(cfg)
    agent = agent or make_agent(cfg, scn)
    weights = RewardWeights(hp.mean_weight, hp.max_weight, hp.gamma)
    T = scn.num_slots
    total_steps = hp.episodes * T
    agent_rng = np.random.default_rng(np.random.SeedSequence([hp.train_seed, 1]))
    pool = [draw_episode(scn, split_seed(hp.train_seed + i)[0])
            for i in range(max(1, hp.train_seed_count))]
    history = []
    step = 0
    since_sync = 0
    for ep in range(hp.episodes):
        t_start = time.perf_counter()
        draws = pool[ep % len(pool)]
        q = np.zeros(scn.num_satellites, dtype=np.int64)
        q_base = q.copy()
        prev = SlotFlows.zeros(scn.num_satellites)
        pending = None
        ep_reward = 0.0
        prev_r = 0.0
        losses = []
        queue_sum = 0.0
        eps = hp.epsilon_start
        for t in range(T):
            eps = epsilon_at(step, total_steps, hp.epsilon_start, hp.epsilon_end, hp.epsilon_fraction)
            inp = policy_input(scn, draws, t, q)
            feats = agent.encode(inp, prev)
            if pending is not None:
                _store(agent, pending, inp.links, feats, done_all=False, scale=hp.reward_scale)
            actions = agent.act(feats, eps, agent_rng)
            q_next, flows = transition(scn, draws, t, q, agent.decision(inp, actions))
            if hp.counterfactual == "one-step":
                q_base = q
            base_inp = policy_input(scn, draws, t, q_base)
            q_base, _ = transition(scn, draws, t, q_base, backpressure_schedule(base_inp))
            r = compute_reward(q_next, q_base, weights)
            ep_reward += r
            stored = r - prev_r if hp.reward_mode == "increment" else r
            prev_r = r
            pending = (inp.links, feats, actions, stored)
            agent.scale.observe(q_next)
            if len(agent.buffer) >= max(hp.warmup, hp.batch_size) and step % hp.train_every == 0:
                for _ in range(hp.updates_per_step):
                    losses.append(train_step(agent.buffer, agent.qnet, agent.target, agent.opt,
                                             weights.discount, hp.batch_size, agent_rng))
                    since_sync += 1
                    if since_sync >= hp.target_sync:
                        agent.sync_target()
                        since_sync = 0
            queue_sum += float(q_next.mean())
            q, prev = q_next, flows
            step += 1
        if pending is not None:
            _store(agent, pending, np.zeros((0, 2), np.int64), None, done_all=True,
                   scale=hp.reward_scale)
        entry = EpisodeLog(ep, ep_reward, eps,
                           float(np.mean(losses)) if losses else 0.0,
                           float(np.max(losses)) if losses else 0.0,
                           queue_sum / T, len(losses))
        history.append(entry)
        log.info("episode %d reward %.3f eps %.3f loss %.4g mean_q %.2f (%.1fs)", ep, entry.reward,
                 eps, entry.loss_mean, entry.mean_queue, time.perf_counter() - t_start)
        if progress is not None:
            progress(entry)
    agent.scale.frozen = True
    return agent, history


def _store(agent, pending, next_links, next_feats, done_all, scale):
    links, feats, actions, reward = pending
    if len(links) == 0:
        return
    index = {} if done_all else _link_index(next_links)
    nxt = np.zeros_like(feats)
    dones = np.ones(len(links), dtype=bool)
    for i, (a, b) in enumerate(links):
        j = index.get((int(a), int(b)))
        if j is not None:
            nxt[i] = next_feats[j]
            dones[i] = False
    agent.buffer.add_batch(feats, actions, np.full(len(links), reward * scale), nxt, dones)


def history_rows(history):
    return [asdict(h) for h in history]
