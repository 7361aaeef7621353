"""Command line entry point: ``leoroute {run,train,eval,sweep,compare}``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, dump_config, load_config
from .policies import POLICY_NAMES

log = logging.getLogger("leoroute")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
HEURISTICS = [p for p in POLICY_NAMES if p != "rl-residual"]


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file (defaults apply when omitted)")
    common.add_argument("--seed", type=int, action="append",
                        help="run seed; repeat for several, overrides config seeds")
    common.add_argument("--out", help="output directory, overrides output_dir")
    common.add_argument("--policy", help=f"policy name ({', '.join(POLICY_NAMES)})")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted config override, YAML-typed, e.g. neighbors.max_neighbors=2")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="leoroute", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="evaluate one policy over the config seeds")
    tr = sub.add_parser("train", parents=[common], help="train the residual agent")
    tr.add_argument("--episodes", type=int, help="override rl.episodes")
    ev = sub.add_parser("eval", parents=[common], help="evaluate a trained checkpoint")
    ev.add_argument("--checkpoint", help="agent checkpoint (.npz), overrides policy.checkpoint")
    sw = sub.add_parser("sweep", parents=[common], help="sweep neighbors/constellation/satellites/gateways")
    sw.add_argument("kind", choices=["neighbors", "constellation", "satellites", "gateways"])
    sw.add_argument("values", nargs="*", help="sweep values (defaults per kind)")
    cp = sub.add_parser("compare", parents=[common], help="several policies on shared seeds")
    cp.add_argument("--policies", nargs="+", default=None,
                    help="policies to compare (default: all heuristics, plus rl-residual if a checkpoint is set)")
    cp.add_argument("--checkpoint", help="agent checkpoint for rl-residual")
    return p


SWEEP_DEFAULTS = {
    "neighbors": [1, 2, 3, 4, 5],
    "constellation": ["builtin:starlink", "builtin:iridium", "builtin:oneweb"],
    "satellites": [5, 10, 20, 40],
    "gateways": ["hybrid", "asia", "europe", "north-america"],
}


def _parse_value(text: str):
    import yaml
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        return text


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.set:
        overrides = {}
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            overrides[k.strip()] = _parse_value(v)
        base = cfg.base_dir
        cfg = cfg.replace(**overrides)
        cfg.base_dir = base
    if args.seed:
        cfg.seeds = list(args.seed)
    if args.out:
        cfg.output_dir = args.out
    if args.policy:
        cfg.policy.name = args.policy
    if getattr(args, "checkpoint", None):
        cfg.policy.checkpoint = str(Path(args.checkpoint).resolve())
    if getattr(args, "episodes", None):
        cfg.rl.episodes = args.episodes
    cfg.validate()
    if cfg.policy.name not in POLICY_NAMES:
        raise ConfigError(f"unknown policy {cfg.policy.name!r}; choose from {', '.join(POLICY_NAMES)}")
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    p = Path(cfg.output_dir)
    return p if p.is_absolute() else Path.cwd() / p


def cmd_run(cfg: RunConfig, args) -> None:
    from .sim import emit_outputs, run_experiment
    rep = run_experiment(cfg)
    emit_outputs(rep, _out_dir(cfg), cfg)
    agg = rep.aggregate()
    print(f"{rep.label}: mean queue {agg['time_avg_mean_q']:.3f} +- {agg['time_avg_mean_q_std']:.3f}"
          f" over {len(rep.seeds)} seeds -> {_out_dir(cfg)}")


def cmd_train(cfg: RunConfig, args) -> None:
    from .rl import train
    from .rl.train import history_rows
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    agent, history = train(cfg, progress=lambda e: print(
        f"episode {e.episode:4d} reward {e.reward:12.2f} eps {e.epsilon:.3f} loss {e.loss_mean:.4g}"))
    agent.save(out / "agent.npz")
    rows = history_rows(history)
    with open(out / "training_log.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    (out / "config.yaml").write_text(dump_config(cfg))
    print(f"checkpoint -> {out / 'agent.npz'}")


def cmd_eval(cfg: RunConfig, args) -> None:
    cfg.policy.name = "rl-residual"
    cmd_run(cfg, args)


def cmd_sweep(cfg: RunConfig, args) -> None:
    from .sim import emit_many, sweep
    values = [_parse_value(v) for v in args.values] or SWEEP_DEFAULTS[args.kind]
    reports = sweep(cfg, args.kind, values)
    emit_many(reports, _out_dir(cfg), cfg, f"sweep_{args.kind}.csv", args.kind)
    for value, rep in reports.items():
        print(f"{args.kind}={value}: mean queue {rep.aggregate()['time_avg_mean_q']:.3f}")


def cmd_compare(cfg: RunConfig, args) -> None:
    from .sim import compare, emit_many
    policies = args.policies or HEURISTICS + (["rl-residual"] if cfg.policy.checkpoint else [])
    unknown = [p for p in policies if p not in POLICY_NAMES]
    if unknown:
        raise ConfigError(f"unknown policies {unknown}; choose from {', '.join(POLICY_NAMES)}")
    reports = compare(cfg, policies)
    emit_many(reports, _out_dir(cfg), cfg, "compare.csv", "policy")
    first = next(iter(reports.values()))
    lr = first.load_ratio()
    print(f"load ratio (arrivals / ground capacity): {lr:.3f}" if lr is not None
          else "load ratio: no ground capacity")
    for name, rep in reports.items():
        agg = rep.aggregate()
        print(f"{name:12s} mean queue {agg['time_avg_mean_q']:10.3f} +- {agg['time_avg_mean_q_std']:.3f}")


COMMANDS = {"run": cmd_run, "train": cmd_train, "eval": cmd_eval, "sweep": cmd_sweep,
            "compare": cmd_compare}


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:  # usage errors count as configuration errors
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
        COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - top-level boundary
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
