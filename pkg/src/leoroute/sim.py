"""Episode runner, multi-seed experiments, sweeps and file outputs."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, dump_config
from .env import Scenario, SimulationError, build_scenario, draw_episode, policy_input, split_seed, transition
from .policies import POLICY_NAMES, make_policy

log = logging.getLogger(__name__)

SERIES_COLUMNS = ("slot", "mean_q", "max_q", "arrivals", "offloaded")
SWEEP_KEYS = {
    "neighbors": "neighbors.max_neighbors",
    "constellation": "constellation.tle_file",
    "satellites": "constellation.num_satellites",
    "gateways": "gateways.preset",
}


@dataclass
class MetricsSeries:
    """Per-slot metrics of one episode; slot ``t`` holds the queues after its update."""
    mean_q: np.ndarray
    max_q: np.ndarray
    arrivals: np.ndarray
    offloaded: np.ndarray
    queues: np.ndarray  # (T, K)
    lg_capacity: np.ndarray  # total ground capacity offered per slot, packets

    def __post_init__(self):
        T = len(self.mean_q)
        for name in ("max_q", "arrivals", "offloaded", "lg_capacity"):
            if len(getattr(self, name)) != T:
                raise ValueError(f"{name} length differs from mean_q")
        if self.queues.shape[0] != T:
            raise ValueError("queue trace length differs from mean_q")
        if T and min(a.min() for a in (self.mean_q, self.max_q, self.arrivals, self.offloaded)) < 0:
            raise ValueError("metrics must be non-negative")

    @property
    def num_slots(self) -> int:
        return len(self.mean_q)

    def ecdf_sample(self) -> np.ndarray:
        return self.queues.ravel()

    def time_average(self) -> float:
        return float(self.mean_q.mean()) if self.num_slots else 0.0

    def equals(self, other: "MetricsSeries") -> bool:
        return all(np.array_equal(getattr(self, f), getattr(other, f))
                   for f in ("mean_q", "max_q", "arrivals", "offloaded", "queues", "lg_capacity"))


def build_policy(cfg: RunConfig, name: str | None = None, agent=None):
    """Policy factory: a fresh ``policy(inp, rng)`` per episode (stateful for rl-residual)."""
    name = name or cfg.policy.name
    if name == "rl-residual":
        if agent is None:
            if not cfg.policy.checkpoint:
                raise ConfigError("policy rl-residual needs policy.checkpoint or --checkpoint")
            path = cfg.resolve(cfg.policy.checkpoint)
            if not path.exists():
                raise ConfigError(f"checkpoint {path} does not exist")
            from .rl import ResidualAgent
            agent = ResidualAgent.load(path)
        return lambda: agent.policy(0.0)
    if name not in POLICY_NAMES:
        raise ConfigError(f"unknown policy {name!r}; choose from {', '.join(POLICY_NAMES)}")
    fn = make_policy(name, cfg.policy.lg_bp_weight, cfg.policy.p_activate)
    return lambda: fn


def run_episode(cfg_or_scn, seed: int, policy=None) -> MetricsSeries:
    """Run one seeded episode. ``policy`` is a factory as returned by :func:`build_policy`."""
    scn = cfg_or_scn if isinstance(cfg_or_scn, Scenario) else build_scenario(cfg_or_scn)
    policy = policy or build_policy(scn.cfg)
    env_rng, pol_rng = split_seed(seed)
    draws = draw_episode(scn, env_rng)
    pf = policy()
    T, K = scn.num_slots, scn.num_satellites
    q = np.zeros(K, dtype=np.int64)
    queues = np.zeros((T, K), dtype=np.int64)
    arrivals = np.zeros(T, dtype=np.int64)
    offloaded = np.zeros(T, dtype=np.int64)
    for t in range(T):
        try:
            decision = pf(policy_input(scn, draws, t, q), pol_rng)
            q, flows = transition(scn, draws, t, q, decision)
        except (ValueError, RuntimeError, FloatingPointError) as exc:
            raise SimulationError(t, exc) from exc
        if hasattr(pf, "observe"):
            pf.observe(flows)
        queues[t] = q
        arrivals[t] = flows.arrivals.sum()
        offloaded[t] = flows.sent_gw.sum()
    mean_q = queues.mean(axis=1) if K else np.zeros(T)
    max_q = queues.max(axis=1) if K else np.zeros(T, dtype=np.int64)
    return MetricsSeries(mean_q, max_q, arrivals, offloaded, queues,
                         np.floor(draws.lg_caps).sum(axis=1))


@dataclass
class ExperimentReport:
    label: str
    seeds: list = field(default_factory=list)
    series: dict = field(default_factory=dict)  # seed -> MetricsSeries

    def averages(self) -> np.ndarray:
        return np.array([self.series[s].time_average() for s in self.seeds])

    def aggregate(self) -> dict:
        """Mean/std across seeds of the per-slot curves and the time-averaged metrics."""
        if not self.seeds:
            return {"mean_q": [], "mean_q_std": [], "max_q": [], "time_avg_mean_q": None,
                    "time_avg_mean_q_std": None, "time_avg_max_q": None, "load_ratio": None}
        mean_curves = np.stack([self.series[s].mean_q for s in self.seeds])
        max_curves = np.stack([self.series[s].max_q for s in self.seeds]).astype(float)
        avg = self.averages()
        return {
            "mean_q": mean_curves.mean(axis=0).tolist(),
            "mean_q_std": mean_curves.std(axis=0).tolist(),
            "max_q": max_curves.mean(axis=0).tolist(),
            "time_avg_mean_q": float(avg.mean()),
            "time_avg_mean_q_std": float(avg.std()),
            "time_avg_max_q": float(max_curves.mean()),
            "load_ratio": self.load_ratio(),
        }

    def load_ratio(self) -> float | None:
        """Offered packets over ground capacity offered, pooled over seeds."""
        arr = sum(float(self.series[s].arrivals.sum()) for s in self.seeds)
        cap = sum(float(self.series[s].lg_capacity.sum()) for s in self.seeds)
        return arr / cap if cap > 0 else None

    def ecdf(self):
        if not self.seeds:
            return np.zeros(0), np.zeros(0)
        sample = np.concatenate([self.series[s].ecdf_sample() for s in self.seeds])
        values, counts = np.unique(sample, return_counts=True)
        return values, np.cumsum(counts) / sample.size


def run_experiment(cfg: RunConfig, seeds=None, policy=None, scenario: Scenario | None = None,
                   label: str | None = None) -> ExperimentReport:
    seeds = list(cfg.seeds if seeds is None else seeds)
    if not seeds:
        raise ConfigError("at least one seed is required")
    scn = scenario or build_scenario(cfg)
    policy = policy or build_policy(cfg)
    report = ExperimentReport(label or cfg.policy.name, seeds)
    for seed in seeds:
        report.series[seed] = run_episode(scn, seed, policy)
        log.info("%s seed %d: time-avg mean queue %.3f", report.label, seed,
                 report.series[seed].time_average())
    return report


def compare(cfg: RunConfig, policies, seeds=None, agent=None) -> dict:
    """Policy name -> report, all on the same scenario and seeds."""
    scn = build_scenario(cfg)
    return {name: run_experiment(cfg, seeds, build_policy(cfg, name, agent), scn, label=name)
            for name in policies}


def sweep(cfg: RunConfig, kind: str, values, seeds=None) -> dict:
    """Value -> report for one of the sweep kinds in ``SWEEP_KEYS``."""
    if kind not in SWEEP_KEYS:
        raise ConfigError(f"unknown sweep {kind!r}; choose from {', '.join(SWEEP_KEYS)}")
    key = SWEEP_KEYS[kind]
    out = {}
    for value in values:
        if kind == "constellation" and not str(value).startswith("builtin:") and "/" not in str(value) \
                and not str(value).endswith(".tle"):
            value = f"builtin:{value}"
        sub = cfg.replace(**{key: value}).validate()
        out[value] = run_experiment(sub, seeds, label=f"{kind}={value}")
    return out


# --------------------------------------------------------------------------
# outputs

def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path: Path, header, rows) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def emit_outputs(report: ExperimentReport, out_dir, cfg: RunConfig | None = None) -> list[Path]:
    """Write config snapshot, per-seed CSVs, the ECDF and a JSON summary. Returns the paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc}") from exc
    written = []
    if cfg is not None:
        _write_text(out / "config.yaml", dump_config(cfg))
        written.append(out / "config.yaml")
    for seed in report.seeds:
        s = report.series[seed]
        rows = zip(range(s.num_slots), s.mean_q, s.max_q, s.arrivals, s.offloaded)
        path = out / f"seed_{seed}.csv"
        _write_csv(path, SERIES_COLUMNS, rows)
        written.append(path)
    values, frac = report.ecdf()
    _write_csv(out / "ecdf.csv", ("value", "cumulative_fraction"), zip(values, frac))
    written.append(out / "ecdf.csv")
    summary = {"label": report.label, "seeds": [int(s) for s in report.seeds],
               "per_seed_time_avg_mean_q": [report.series[s].time_average() for s in report.seeds],
               **report.aggregate()}
    _write_text(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    written.append(out / "summary.json")
    return written


def emit_table(reports: dict, out_dir, name: str, key: str) -> Path:
    """One row per report: key value, time-averaged mean/std queue, max queue, load ratio."""
    rows = []
    for value, rep in reports.items():
        agg = rep.aggregate()
        lr = agg["load_ratio"]
        rows.append((value, _fmt(agg["time_avg_mean_q"]), _fmt(agg["time_avg_mean_q_std"]),
                     _fmt(agg["time_avg_max_q"]), "" if lr is None else _fmt(lr)))
    path = Path(out_dir) / name
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow((key, "mean_q", "mean_q_std", "max_q", "load_ratio"))
            w.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def _slug(value) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in str(value))


def emit_many(reports: dict, out_dir, cfg: RunConfig, table_name: str, key: str) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_text(out / "config.yaml", dump_config(cfg))
    paths = [out / "config.yaml"]
    for value, rep in reports.items():
        paths += emit_outputs(rep, out / _slug(value))
    paths.append(emit_table(reports, out, table_name, key))
    return paths
