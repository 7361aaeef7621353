"""Regenerate the pinned regression checkpoint and its greedy actions under tests/data/."""
import json
from pathlib import Path

import numpy as np

from leoroute.config import load_config
from leoroute.env import build_scenario, draw_episode, policy_input, split_seed
from leoroute.queueing import SlotFlows
from leoroute.rl import train

ROOT = Path(__file__).resolve().parents[1]
OVERRIDES = {"time.num_slots": 30, "rl.episodes": 6, "rl.hidden": [32, 32], "rl.warmup": 100,
             "rl.batch_size": 32, "rl.train_seed_count": 2, "rl.epsilon_fraction": 1.0}
STATE_SEED = 7
SLOTS = (3, 12, 21)


def fixture_queues(K):
    return np.arange(K) * 37 % 200


def main():
    cfg = load_config(ROOT / "configs" / "fixture.yaml").replace(**OVERRIDES)
    scn = build_scenario(cfg)
    agent, _ = train(cfg, scn)
    out = ROOT / "tests" / "data"
    out.mkdir(parents=True, exist_ok=True)
    agent.save(out / "golden_agent.npz")
    draws = draw_episode(scn, split_seed(STATE_SEED)[0])
    q = fixture_queues(scn.num_satellites)
    golden = {}
    for t in SLOTS:
        feats = agent.encode(policy_input(scn, draws, t, q), SlotFlows.zeros(scn.num_satellites))
        golden[str(t)] = agent.act(feats, 0.0, np.random.default_rng(0)).tolist()
    (out / "golden_actions.json").write_text(json.dumps(golden, indent=1) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
