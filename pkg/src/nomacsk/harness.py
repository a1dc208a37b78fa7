"""Experiment orchestration: training, sweeps, illumination table, CSV output.

Random streams are keyed by counters rather than drawn in sequence.  The
channel of grid point ``i`` and trial ``t`` comes from
``default_rng([seed, CHANNEL_TAG, i, t])`` and the Monte Carlo stream of
policy ``p`` at that point from ``default_rng([seed, BER_TAG, i, p, t])``,
with ``p`` the policy's position in :data:`POLICIES`.  Rows therefore do not
depend on which other policies are evaluated, on job order or on the
number of worker processes.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import typing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import ChannelPair, sample_channel_pair
from .checkpoint import save_agent
from .environment import EnvConfig, RewardConfig
from .errors import ConfigurationError
from .illumination import illumination_compare
from .link import LinkConfig, evaluate_link
from .policies import POLICIES, apply_policy, tdma_eval
from .sac import AgentConfig
from .training import TrainingRun

CHANNEL_TAG = 0xC4A
BER_TAG = 0xBE7
SNR_BER_H1 = 3.132e-4

SWEEP_COLUMNS = ("r", "policy", "rho", "T1", "T2", "sum_rate", "J", "BER1", "BER2", "seed")
SNR_COLUMNS = ("r", "snr_db", "policy", "rho", "T1", "T2", "sum_rate", "J", "BER1", "BER2", "seed")
TRAIN_COLUMNS = ("episode", "return", "steps", "terminal_J", "rolling_avg_return")
ILLUM_COLUMNS = ("label", "rho", "cri", "cct_k", "flux_lm", "flux_ratio")


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    policies: tuple[str, ...] = ("sac", "grpa", "ngdpa", "tdma")
    r_step: float = 0.01
    trials: int = 20
    mc_symbols: int = 20_000
    snr_start: float = 0.0
    snr_stop: float = 30.0
    snr_step: float = 5.0
    snr_ratios: tuple[float, ...] = (0.1, 0.5, 0.9)
    snr_h1: float = SNR_BER_H1
    bounds_scale: float = 5.0
    illum_rho: float = 1.0 / 30.0
    workers: int = 1
    link: LinkConfig = field(default_factory=LinkConfig)
    env: EnvConfig = field(default_factory=EnvConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)

    def __post_init__(self):
        unknown = set(self.policies) - set(POLICIES)
        if unknown or not self.policies:
            raise ConfigurationError(f"unknown policies {sorted(unknown)}; choose from {POLICIES}")
        n = 1.0 / self.r_step
        if not 0.0 < self.r_step < 1.0 or abs(n - round(n)) > 1e-9:
            raise ConfigurationError("r_step must divide 1 evenly")
        if self.trials < 1 or self.workers < 1 or self.mc_symbols < 1000:
            raise ConfigurationError("trials and workers must be >= 1, mc_symbols >= 1000")
        if self.snr_step <= 0 or self.snr_stop < self.snr_start:
            raise ConfigurationError("bad SNR grid")
        if self.bounds_scale < 1.0:
            raise ConfigurationError("bounds_scale must be >= 1")

    @property
    def r_grid(self) -> np.ndarray:
        n = int(round(1.0 / self.r_step))
        return np.round(np.arange(1, n) * self.r_step, 12)

    @property
    def snr_grid(self) -> np.ndarray:
        n = int(np.floor((self.snr_stop - self.snr_start) / self.snr_step + 1e-9))
        return np.round(self.snr_start + np.arange(n + 1) * self.snr_step, 12)

    def paper_scale(self) -> "ExperimentConfig":
        return dataclasses.replace(self, r_step=0.001, trials=500, mc_symbols=self.link.mc_symbols,
                                   snr_step=1.0)


# --- config file ---------------------------------------------------------------------

_SECTIONS = {"link": "link", "env": "env", "agent": "agent", "reward": "reward"}
_TOP_LEVEL = {
    "experiment.seed": "seed", "experiment.workers": "workers",
    "sweep.policies": "policies", "sweep.r_step": "r_step", "sweep.trials": "trials",
    "sweep.mc_symbols": "mc_symbols",
    "snr.start": "snr_start", "snr.stop": "snr_stop", "snr.step": "snr_step",
    "snr.ratios": "snr_ratios", "snr.h1": "snr_h1",
    "generalize.bounds_scale": "bounds_scale", "illum.rho": "illum_rho",
}


def _coerce(value: str, hint, current):
    """Convert ``value`` to the type of a dataclass field."""
    origin = typing.get_origin(hint)
    if origin is tuple or isinstance(current, tuple):
        args = typing.get_args(hint)
        inner = args[0] if args else type(current[0]) if current else str
        parts = [p.strip() for p in value.split(",") if p.strip()]
        return tuple(_coerce(p, inner, None) for p in parts)
    kind = hint if isinstance(hint, type) else type(current)
    if kind is bool:
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if kind is int:
        return int(float(value)) if float(value).is_integer() else int(value)
    if kind is float:
        return float(value)
    return value


def _replace(obj, name: str, value: str):
    hints = typing.get_type_hints(type(obj))
    if name not in hints:
        raise ConfigurationError(f"{type(obj).__name__} has no setting {name!r}")
    try:
        return dataclasses.replace(obj, **{name: _coerce(value, hints[name], getattr(obj, name))})
    except (ValueError, TypeError) as exc:
        raise ConfigurationError(f"bad value for {name}: {exc}") from None


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``dotted.key = value`` lines; ``#`` starts a comment."""
    entries = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        entries[key] = value
    return entries


def apply_settings(cfg: ExperimentConfig, settings: dict[str, str]) -> ExperimentConfig:
    for key, value in settings.items():
        if key in _TOP_LEVEL:
            cfg = _replace(cfg, _TOP_LEVEL[key], value)
            continue
        section, _, name = key.partition(".")
        if section not in _SECTIONS or not name:
            raise ConfigurationError(f"unknown setting {key!r}")
        attr = _SECTIONS[section]
        sub = _replace(getattr(cfg, attr), name, value)
        cfg = dataclasses.replace(cfg, **{attr: sub})
    # the environment evaluates links with the experiment's link settings
    if cfg.env.link != cfg.link:
        cfg = dataclasses.replace(cfg, env=dataclasses.replace(cfg.env, link=cfg.link))
    return cfg


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    return apply_settings(ExperimentConfig(), parse_config_text(text))


# --- CSV -----------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        if not np.isfinite(v):
            raise ValueError("non-finite value in CSV row")
        return repr(float(v))
    return str(v)


def rows_to_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    path.write_text(rows_to_csv(columns, rows), encoding="utf-8")
    return path


def aggregate_path(path) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}_mean{path.suffix or '.csv'}")


def aggregate(rows, key_columns, value_columns) -> list[dict]:
    """Mean of ``value_columns`` per key, in order of first appearance."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in key_columns), []).append(row)
    out = []
    for key, members in groups.items():
        rec = dict(zip(key_columns, key))
        for c in value_columns:
            rec[c] = float(np.mean([m[c] for m in members]))
        rec["n_seeds"] = len(members)
        out.append(rec)
    return out


# --- evaluation ----------------------------------------------------------------------

def evaluate_policy(policy: str, pair: ChannelPair, cfg: LinkConfig, rng: np.random.Generator,
                    n_symbols: int, agent=None) -> dict:
    decision = apply_policy(policy, pair, agent)
    if decision.time_split:
        report = tdma_eval(pair, cfg, rng, n_symbols)
        rho = 0.5  # equal time shares
    else:
        report = evaluate_link(pair, decision.rho1, cfg, rng, n_symbols)
        rho = decision.rho1
    return {"policy": policy, "rho": rho, "T1": report.throughput[0], "T2": report.throughput[1],
            "sum_rate": report.sum_rate, "J": report.jain, "BER1": report.ber[0],
            "BER2": report.ber[1]}


def _sweep_point(job):
    i, r, cfg, bounds, agent = job
    rows = []
    for t in range(cfg.trials):
        pair = sample_channel_pair(r, np.random.default_rng([cfg.seed, CHANNEL_TAG, i, t]), bounds)
        for p in cfg.policies:
            rng = np.random.default_rng([cfg.seed, BER_TAG, i, POLICIES.index(p), t])
            row = evaluate_policy(p, pair, cfg.link, rng, cfg.mc_symbols, agent)
            rows.append({"r": float(r), **row, "seed": t})
    return rows


def _snr_point(job):
    i, r, snr, cfg, agent = job
    link = dataclasses.replace(cfg.link, snr_db=float(snr))
    pair = ChannelPair.from_ratio(cfg.snr_h1, float(r))
    rows = []
    for t in range(cfg.trials):
        for p in cfg.policies:
            rng = np.random.default_rng([cfg.seed, BER_TAG, i, POLICIES.index(p), t])
            row = evaluate_policy(p, pair, link, rng, cfg.mc_symbols, agent)
            rows.append({"r": float(r), "snr_db": float(snr), **row, "seed": t})
    return rows


def _run_jobs(fn, jobs, workers: int):
    if workers <= 1:
        results = [fn(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fn, jobs))
    return [row for rows in results for row in rows]


def _need_agent(cfg: ExperimentConfig, agent):
    if "sac" in cfg.policies and agent is None:
        raise ConfigurationError("policy 'sac' needs a trained agent checkpoint")


def run_sweep_r(cfg: ExperimentConfig, agent=None, out=None, bounds=None):
    """Evaluate every policy across the r grid; returns ``(rows, mean_rows)``."""
    _need_agent(cfg, agent)
    bounds = bounds or cfg.env.channel_bounds
    jobs = [(i, r, cfg, bounds, agent) for i, r in enumerate(cfg.r_grid)]
    rows = _run_jobs(_sweep_point, jobs, cfg.workers)
    means = aggregate(rows, ("r", "policy"), ("rho", "T1", "T2", "sum_rate", "J", "BER1", "BER2"))
    if out is not None:
        write_csv(out, SWEEP_COLUMNS, rows)
        write_csv(aggregate_path(out), ("r", "policy") + SWEEP_COLUMNS[2:-1] + ("n_seeds",), means)
    return rows, means


def run_generalization(cfg: ExperimentConfig, agent=None, out=None):
    """The r sweep with channel bounds widened by ``cfg.bounds_scale``; never trains."""
    lo, hi = cfg.env.channel_bounds
    bounds = (lo / cfg.bounds_scale, hi * cfg.bounds_scale)
    return run_sweep_r(cfg, agent, out, bounds)


def run_snr_ber(cfg: ExperimentConfig, agent=None, out=None):
    """BER against SNR at fixed ``h1`` for each ratio in ``cfg.snr_ratios``."""
    if "tdma" in cfg.policies:
        cfg = dataclasses.replace(cfg, policies=tuple(p for p in cfg.policies if p != "tdma"))
    _need_agent(cfg, agent)
    jobs = []
    for r in cfg.snr_ratios:
        for snr in cfg.snr_grid:
            jobs.append((len(jobs), r, snr, cfg, agent))
    rows = _run_jobs(_snr_point, jobs, cfg.workers)
    means = aggregate(rows, ("r", "snr_db", "policy"),
                      ("rho", "T1", "T2", "sum_rate", "J", "BER1", "BER2"))
    if out is not None:
        write_csv(out, SNR_COLUMNS, rows)
        write_csv(aggregate_path(out), SNR_COLUMNS[:-1] + ("n_seeds",), means)
    return rows, means


def checkpoint_path(out) -> Path:
    return Path(out).with_suffix(".ckpt")


def run_train(cfg: ExperimentConfig, out=None, checkpoint=None, progress=None) -> TrainingRun:
    """Train one agent; writes the per-episode CSV and a resumable checkpoint."""
    from . import training

    training.TRAINING_CALLS += 1
    run = TrainingRun.start(cfg.env, cfg.agent, cfg.reward, cfg.seed).run(progress=progress)
    if out is not None:
        rows = [{"episode": h.episode, "return": h.ret, "steps": h.steps,
                 "terminal_J": h.terminal_j, "rolling_avg_return": h.rolling_avg_return}
                for h in run.history]
        write_csv(out, TRAIN_COLUMNS, rows)
        save_agent(checkpoint or checkpoint_path(out), run)
    return run


def run_illumination(cfg: ExperimentConfig, out=None) -> list[dict]:
    reports = illumination_compare(cfg.illum_rho, cfg.link.p_led, cfg.link.leds,
                                   cfg.link.constellation)
    base = reports[0].luminous_flux
    rhos = (1.0, 1.0, cfg.illum_rho)
    rows = [{"label": rep.label, "rho": rho, "cri": rep.cri_ra, "cct_k": rep.cct,
             "flux_lm": rep.luminous_flux, "flux_ratio": rep.luminous_flux / base}
            for rep, rho in zip(reports, rhos)]
    if out is not None:
        write_csv(out, ILLUM_COLUMNS, rows)
    return rows
