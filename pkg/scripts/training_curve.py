"""Train the residual agent and write the per-episode reward curve, then evaluate it against LG-BP and BP.

    python scripts/training_curve.py [config] [out_dir]
"""
import csv
import sys
import time
from pathlib import Path

import numpy as np

from leoroute.config import load_config
from leoroute.env import build_scenario
from leoroute.rl import train
from leoroute.rl.train import history_rows
from leoroute.sim import build_policy, run_experiment

ROOT = Path(__file__).resolve().parents[1]


def main():
    cfg = load_config(sys.argv[1] if len(sys.argv) > 1 else ROOT / "configs" / "fixture.yaml")
    out = Path(sys.argv[2] if len(sys.argv) > 2 else "runs/training_curve")
    out.mkdir(parents=True, exist_ok=True)
    scn = build_scenario(cfg)
    t0 = time.perf_counter()
    agent, hist = train(cfg, scn, progress=lambda e: print(f"episode {e.episode:3d} reward {e.reward:10.1f}"))
    print(f"training took {time.perf_counter() - t0:.0f}s")
    agent.save(out / "agent.npz")
    rows = history_rows(hist)
    with open(out / "training_log.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    r = np.array([h.reward for h in hist])
    print(f"first-10 mean {r[:10].mean():.1f}, last-10 mean {r[-10:].mean():.1f}")
    for name in ("bp", "lg-bp", "rl-residual"):
        rep = run_experiment(cfg, scenario=scn, policy=build_policy(cfg, name, agent), label=name)
        avg = rep.averages()
        print(f"{name:12s} mean queue {avg.mean():8.3f} +- {avg.std():.3f}")


if __name__ == "__main__":
    main()
