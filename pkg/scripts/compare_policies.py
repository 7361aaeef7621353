"""Every heuristic policy on the config seeds, optionally with a trained checkpoint.

    python scripts/compare_policies.py [config] [checkpoint]
"""
import sys
from pathlib import Path

from leoroute.cli import main as cli_main

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    argv = ["compare", "--config", sys.argv[1] if len(sys.argv) > 1 else str(ROOT / "configs" / "fixture.yaml")]
    if len(sys.argv) > 2:
        argv += ["--checkpoint", sys.argv[2]]
    sys.exit(cli_main(argv))
