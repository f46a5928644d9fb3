"""Named experiment presets, seeded multi-run execution and metric files.

Seeding: run ``k`` of an experiment draws from
``numpy.random.SeedSequence(master_seed).spawn(seeds)[k]``; runs never share a
stream, so a run's output depends only on (preset, knobs, master seed, k).

``metrics.csv`` is long format with header
``experiment,seed,episode,agent,metric,value``. With ``log_every > 1`` a row
holds the mean over ``log_every`` consecutive episodes and ``episode`` is the
first episode of that block.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analytic
from .cleanup import CleanupConfig
from .ipd import VARIANTS
from .learners import save_params
from .training import CleanupHyper, IpdHyper, train_cleanup, train_ipd

log = logging.getLogger(__name__)

CSV_HEADER = ("experiment", "seed", "episode", "agent", "metric", "value")


@dataclass(frozen=True)
class Preset:
    id: str
    kind: str  # "ipd" | "cleanup" | "analytic"
    description: str
    reference: str
    episodes: int
    seeds: int
    variant: str | None = None
    mechanism: str | None = None
    map_id: str | None = None


PRESETS = {
    p.id: p
    for p in (
        Preset("ipd-i", "ipd", "IPD, individual rewards only", "IPD implementation (i)", 10_000, 5, "no_participation"),
        Preset("ipd-ii", "ipd", "IPD, rewards always split equally", "IPD implementation (ii)", 10_000, 5, "equal_split"),
        Preset("ipd-iii", "ipd", "IPD, split only if both choose to share", "IPD implementation (iii)", 10_000, 5, "choose_share"),
        Preset("ipd-iv", "ipd", "IPD, per-step trading of 50% share blocks", "IPD implementation (iv)", 30_000, 10, "trade50"),
        Preset("ipd-v", "ipd", "IPD, per-step trading of 10% share blocks", "IPD implementation (v)", 30_000, 10, "trade10"),
        Preset("cleanup2-none", "cleanup", "Cleanup 7x7, two agents, no participation", "two-agent Cleanup (i)", 50_000, 5, mechanism="none", map_id="small7x7"),
        Preset("cleanup2-equal", "cleanup", "Cleanup 7x7, two agents, equal split", "two-agent Cleanup (iii)", 50_000, 5, mechanism="equal", map_id="small7x7"),
        Preset("cleanup2-pretrade", "cleanup", "Cleanup 7x7, two agents, pre-trade of participation", "two-agent Cleanup (iv)", 50_000, 5, mechanism="pretrade", map_id="small7x7"),
        Preset("cleanup3-none", "cleanup", "Cleanup 10x10, three agents, no participation", "three-agent Cleanup (i)", 50_000, 5, mechanism="none", map_id="big10x10"),
        Preset("cleanup3-equal", "cleanup", "Cleanup 10x10, three agents, equal split", "three-agent Cleanup (iii)", 50_000, 5, mechanism="equal", map_id="big10x10"),
        Preset("cleanup3-pretrade", "cleanup", "Cleanup 10x10, three agents, pre-trade of participation", "three-agent Cleanup (iv)", 50_000, 5, mechanism="pretrade", map_id="big10x10"),
        Preset("cleanup3-pool", "cleanup", "Cleanup 10x10, three agents, common reward pool", "three-agent Cleanup (v)", 50_000, 5, mechanism="pool", map_id="big10x10"),
        Preset("analytic", "analytic", "Closed-form IPD dynamics with a broker-priced share market", "theoretical share-market dynamics", 100, 20),
    )
}


def list_experiments() -> list[Preset]:
    return list(PRESETS.values())


def _knob_types() -> dict[str, tuple[str, type]]:
    table = {}
    for owner, cls in (("ipd", IpdHyper), ("cleanup", CleanupHyper), ("env", CleanupConfig), ("analytic", analytic.AnalyticConfig)):
        for f in dataclasses.fields(cls):
            if f.name in ("map_id", "n_agents", "runs", "episodes"):
                continue
            default = f.default
            table.setdefault(f.name, []).append((owner, type(default)))
    return table


KNOBS = _knob_types()


def parse_override(text: str) -> tuple[str, object]:
    """Parse ``key=value`` into a typed knob value."""
    if "=" not in text:
        raise ValueError(f"override {text!r} is not key=value")
    key, raw = (s.strip() for s in text.split("=", 1))
    if key not in KNOBS:
        raise ValueError(f"unknown knob {key!r}; known: {', '.join(sorted(KNOBS))}")
    typ = KNOBS[key][0][1]
    if typ is bool:
        if raw.lower() not in ("true", "false", "1", "0"):
            raise ValueError(f"{key} expects true/false")
        return key, raw.lower() in ("true", "1")
    try:
        return key, typ(raw)
    except ValueError as exc:
        raise ValueError(f"{key} expects {typ.__name__}: {exc}") from None


def read_config_file(path) -> dict[str, object]:
    """Plain text, one ``key=value`` per line; ``#`` starts a comment."""
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            k, v = parse_override(line)
            out[k] = v
    return out


@dataclass
class ExperimentConfig:
    experiment: str
    seeds: int | None = None
    episodes: int | None = None
    out: str = "results"
    workers: int = 1
    master_seed: int = 0
    log_every: int | None = None
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in PRESETS:
            raise ValueError(f"unknown experiment {self.experiment!r}; run 'list' for the presets")
        p = PRESETS[self.experiment]
        self.seeds = p.seeds if self.seeds is None else self.seeds
        self.episodes = p.episodes if self.episodes is None else self.episodes
        if self.seeds < 1:
            raise ValueError("seeds must be >= 1")
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.log_every is None:
            self.log_every = 1 if p.kind == "analytic" else max(1, self.episodes // 1000)
        for k in self.overrides:
            if k not in KNOBS:
                raise ValueError(f"unknown knob {k!r}")

    @property
    def preset(self) -> Preset:
        return PRESETS[self.experiment]

    def _pick(self, cls, **fixed):
        names = {f.name for f in dataclasses.fields(cls)}
        kw = {k: v for k, v in self.overrides.items() if k in names}
        kw.update(fixed)
        return cls(**kw)

    def ipd_hyper(self) -> IpdHyper:
        return self._pick(IpdHyper)

    def cleanup_hyper(self) -> CleanupHyper:
        return self._pick(CleanupHyper)

    def cleanup_config(self) -> CleanupConfig:
        return self._pick(CleanupConfig, map_id=self.preset.map_id)

    def analytic_config(self) -> analytic.AnalyticConfig:
        return self._pick(analytic.AnalyticConfig, runs=1, episodes=self.episodes)


def seed_streams(master_seed: int, seeds: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(master_seed).spawn(seeds)]


def _agent_metric(name: str) -> tuple[str, str]:
    """Split ``apples_2`` into ("2", "apples"); joint metrics keep agent "joint"."""
    base, _, suffix = name.rpartition("_")
    if suffix.isdigit():
        return suffix, base
    return "joint", name


def run_seed(cfg: ExperimentConfig, index: int):
    """Execute run ``index``; returns (metric arrays, list of learners or None)."""
    rng = seed_streams(cfg.master_seed, cfg.seeds)[index]
    p = cfg.preset
    if p.kind == "ipd":
        learners, m = train_ipd(p.variant, cfg.episodes, rng, cfg.ipd_hyper())
        metrics = {k: m[k] for k in ("joint_reward", "cooperation_1", "cooperation_2")}
        if VARIANTS[p.variant].trading:
            # symmetric trades keep both own shares equal
            for i in (1, 2):
                metrics[f"own_share_{i}"] = m["own_share_end"]
                metrics[f"own_share_mean_{i}"] = m["own_share_mean"]
        return metrics, learners
    if p.kind == "cleanup":
        learners, metrics = train_cleanup(cfg.cleanup_config(), p.mechanism, cfg.episodes, rng, cfg.cleanup_hyper())
        return metrics, learners
    series = analytic.simulate_run(cfg.analytic_config(), rng)
    metrics = {
        "m": series["m"],
        "n": series["n"],
        "theta_1": series["theta1"],
        "theta_2": series["theta2"],
        "price": series["price"],
        "joint_reward": series["joint_reward"],
    }
    return metrics, None


def metric_rows(experiment: str, seed: int, metrics: dict[str, np.ndarray], log_every: int = 1):
    for name in sorted(metrics):
        agent, metric = _agent_metric(name)
        values = np.asarray(metrics[name], dtype=float)
        for start in range(0, values.size, log_every):
            v = float(values[start : start + log_every].mean())
            yield (experiment, seed, start, agent, metric, repr(v))


def _run_one(cfg: ExperimentConfig, index: int, out: Path) -> Path:
    metrics, learners = run_seed(cfg, index)
    path = out / "runs" / f"seed_{index}.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerows(metric_rows(cfg.experiment, index, metrics, cfg.log_every))
    for i, learner in enumerate(learners or ()):
        save_params(out / "params" / f"seed_{index}_agent_{i + 1}.txt", learner)
    log.info("%s seed %d done", cfg.experiment, index)
    return path


def run(cfg: ExperimentConfig) -> Path:
    """Run every seed, write per-run files, merge them into ``metrics.csv``."""
    out = Path(cfg.out)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    (out / "params").mkdir(exist_ok=True)
    snapshot = dataclasses.asdict(cfg)
    snapshot["resolved"] = {
        "preset": dataclasses.asdict(cfg.preset),
        "ipd": dataclasses.asdict(cfg.ipd_hyper()),
        "cleanup": dataclasses.asdict(cfg.cleanup_hyper()),
        "analytic": dataclasses.asdict(cfg.analytic_config()),
    }
    if cfg.preset.kind == "cleanup":
        snapshot["resolved"]["env"] = dataclasses.asdict(cfg.cleanup_config())
    (out / "config.json").write_text(json.dumps(snapshot, indent=2, sort_keys=True) + "\n")

    if cfg.workers > 1 and cfg.seeds > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, cfg.seeds)) as pool:
            paths = list(pool.map(_run_one, [cfg] * cfg.seeds, range(cfg.seeds), [out] * cfg.seeds))
    else:
        paths = [_run_one(cfg, k, out) for k in range(cfg.seeds)]

    tmp = out / "metrics.csv.tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for p in paths:
            fh.write(p.read_text())
    os.replace(tmp, out / "metrics.csv")
    return out


def read_metrics(path) -> dict[tuple[str, str], dict[int, list[tuple[int, float]]]]:
    """Load ``metrics.csv`` as {(metric, agent): {seed: [(episode, value), ...]}}."""
    path = Path(path)
    if path.is_dir():
        path = path / "metrics.csv"
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        data: dict = {}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(CSV_HEADER):
                raise ValueError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields")
            _, seed, episode, agent, metric, value = row
            try:
                rec = (int(episode), float(value))
                seed = int(seed)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed number") from None
            data.setdefault((metric, agent), {}).setdefault(seed, []).append(rec)
    return data
