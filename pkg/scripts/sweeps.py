"""Run the neighbor, constellation, satellite-count and gateway sweeps for one policy.

    python scripts/sweeps.py [config] [out_dir] [policy ...]

Each sweep lands in ``out_dir/<kind>/<policy>/`` with a ``sweep_<kind>.csv`` table.
"""
import sys
from pathlib import Path

from leoroute.cli import SWEEP_DEFAULTS
from leoroute.config import load_config
from leoroute.sim import emit_many, sweep

ROOT = Path(__file__).resolve().parents[1]


def main():
    cfg = load_config(sys.argv[1] if len(sys.argv) > 1 else ROOT / "configs" / "fixture.yaml")
    out = Path(sys.argv[2] if len(sys.argv) > 2 else "runs/sweeps")
    policies = sys.argv[3:] or ["bp", "lg-bp", "no-isl"]
    for kind, values in SWEEP_DEFAULTS.items():
        for name in policies:
            reports = sweep(cfg.replace(**{"policy.name": name}), kind, values)
            emit_many(reports, out / kind / name, cfg, f"sweep_{kind}.csv", kind)
            cells = ", ".join(f"{v}: {r.averages().mean():.2f}" for v, r in reports.items())
            print(f"{kind:13s} {name:8s} {cells}")


if __name__ == "__main__":
    main()
