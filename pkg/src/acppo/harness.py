"""Experiment orchestration: calibration, regime comparisons, sweeps, reports.

The harness owns everything above a single training run: detuning the
scripted expert until it lands at a chosen fraction of the target return,
running the four regimes on common expert data and seeds, computing sample
reductions with the failed-baseline convention, and the two ablation sweeps
(amount of expert data, amount of rollout data). Calibration and evaluation
episodes never enter any step ledger; the expert is treated as pre-existing.
"""

import configparser
import dataclasses
import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import save_dataset
from .envs import expert_for, make_env
from .ppo import PpoConfig, Regime, RunMetrics, evaluate, finetune, fresh_networks
from .pretrain import (
    PretrainConfig,
    bc_pretrain,
    collect_expert,
    pretrain_pipeline,
)
from .seeding import derive_seed, rng_for

REPORT_VERSION = 1
TABLE_REGIME_ORDER = ("NP", "AP", "PIRL", "ACP")
CALIBRATION_EPISODES = 30
CALIBRATION_TOLERANCE = 0.05


@dataclass(frozen=True)
class ExperimentConfig:
    env_id: str
    regimes: tuple = TABLE_REGIME_ORDER
    seeds: tuple = (0, 1, 2)
    expert_fraction: float = 0.65  # c: expert return as a fraction of target
    n_exp: int = 4000
    n_rol: int = 10000
    ppo: PpoConfig = field(default_factory=PpoConfig)
    pretrain: PretrainConfig = field(default_factory=PretrainConfig)
    output_dir: str = "results"

    def __post_init__(self):
        if not 0.0 < self.expert_fraction < 1.0:
            raise ValueError("expert_fraction must be in (0, 1)")
        for regime in self.regimes:
            Regime(regime)
        if self.ppo.gamma != self.pretrain.gamma:
            raise ValueError(
                "ppo.gamma and pretrain.gamma must match so pretrained critic "
                "targets are consistent with fine-tuning"
            )


def recommended_experiment(env_id, **overrides):
    """Tuned desk-scale defaults per environment."""
    profiles = {
        "point-reach": dict(
            n_exp=4000, n_rol=10000,
            ppo=PpoConfig(gamma=0.99, rollout_length=2048, eval_interval=4096,
                          max_env_steps=200_000),
            pretrain=PretrainConfig(gamma=0.99),
        ),
        "cartpole-cont": dict(
            n_exp=3000, n_rol=10000,
            ppo=PpoConfig(gamma=0.99, rollout_length=2048, eval_interval=4096,
                          max_env_steps=200_000),
            pretrain=PretrainConfig(gamma=0.99),
        ),
        "linquad": dict(
            n_exp=2000, n_rol=5000,
            ppo=PpoConfig(gamma=0.95, rollout_length=500, eval_interval=1000,
                          max_env_steps=60_000, minibatch_size=64),
            pretrain=PretrainConfig(gamma=0.95),
        ),
    }
    if env_id not in profiles:
        raise ValueError(f"no recommended profile for env {env_id!r}")
    kwargs = profiles[env_id]
    kwargs.update(overrides)
    return ExperimentConfig(env_id=env_id, **kwargs)


@dataclass(frozen=True)
class CalibrationResult:
    quality: float
    mean_return: float
    expert_target: float
    fraction: float


def expert_return_target(target_return, fraction):
    """Return level a fraction-c expert should attain.

    For positive targets this is c * G_tar; for cost-style negative targets
    the magnitude scales inversely (G_tar / c), which preserves "worse than
    target by factor c" in both cases.
    """
    if target_return > 0:
        return fraction * target_return
    return target_return / fraction


def controller_return(env, controller, episodes, seed):
    """Mean undiscounted return of a scripted controller (seeded)."""
    returns = np.empty(episodes)
    for i in range(episodes):
        obs = env.reset(derive_seed(seed, "calib-episode", i))
        noise_rng = rng_for(seed, "calib-noise", i)
        total = 0.0
        while True:
            result = env.step(controller.action(obs, noise_rng), env.spec.horizon)
            total += result.reward
            obs = result.next_obs
            if result.done:
                break
        returns[i] = total
    return float(returns.mean())


def calibrate_expert(env_id, fraction=0.65, seed=0, episodes=CALIBRATION_EPISODES,
                     tolerance=CALIBRATION_TOLERANCE, max_iters=40):
    """Bisect the expert quality knob to a fraction-c return level.

    Deterministic given the seed. Calibration episodes model a pre-existing
    expert and are charged to no step ledger.
    """
    env = make_env(env_id)
    target = expert_return_target(env.spec.target_return, fraction)
    band = sorted([target * (1 - tolerance), target * (1 + tolerance)])

    def mean_return(quality):
        return controller_return(env, expert_for(env_id, quality), episodes, seed)

    lo_ret, hi_ret = mean_return(0.0), mean_return(1.0)
    if not lo_ret <= target <= hi_ret:
        raise ValueError(
            f"expert fraction {fraction} asks for return {target:.4g}, outside "
            f"the attainable range [{lo_ret:.4g}, {hi_ret:.4g}] on {env_id}"
        )
    lo, hi = 0.0, 1.0
    quality, ret = 1.0, hi_ret
    for _ in range(max_iters):
        quality = 0.5 * (lo + hi)
        ret = mean_return(quality)
        if band[0] <= ret <= band[1]:
            break
        if ret < target:
            lo = quality
        else:
            hi = quality
    else:
        raise RuntimeError(
            f"calibration did not converge on {env_id}: last quality {quality} "
            f"-> return {ret:.4g}, wanted {band}"
        )
    return CalibrationResult(quality, ret, target, fraction)


def sample_reduction(n_tot_method, n_tot_baseline, baseline_reached):
    """1 - n_tot_method / n_tot_baseline; 1.0 when the baseline never
    reached the target within budget."""
    if not baseline_reached:
        return 1.0
    return 1.0 - n_tot_method / n_tot_baseline


@dataclass
class ComparisonReport:
    env_id: str
    fraction: float
    quality: float
    seeds: tuple
    regimes: tuple
    budget: int
    target_return: float
    cells: dict  # regime -> {seed -> RunMetrics}
    failures: list = field(default_factory=list)  # (regime, seed, error)

    def metrics_list(self, regime):
        return [self.cells[regime][s] for s in self.seeds]

    def median_n_tot(self, regime):
        return statistics.median(m.n_tot for m in self.metrics_list(regime))

    def reached_count(self, regime):
        return sum(m.reached_target for m in self.metrics_list(regime))

    def regime_reached(self, regime):
        """Majority-of-seeds convention for the failed-baseline rule."""
        return self.reached_count(regime) >= (len(self.seeds) + 1) // 2

    def reductions(self, method="ACP"):
        """Sample reduction of ``method`` vs every other regime (medians)."""
        if method not in self.cells:
            return {}
        out = {}
        for baseline in self.regimes:
            if baseline == method:
                continue
            out[baseline] = sample_reduction(
                self.median_n_tot(method), self.median_n_tot(baseline),
                self.regime_reached(baseline),
            )
        return out

    def to_dict(self):
        return {
            "report_version": REPORT_VERSION,
            "env_id": self.env_id,
            "fraction": self.fraction,
            "quality": self.quality,
            "seeds": list(self.seeds),
            "regimes": list(self.regimes),
            "budget": self.budget,
            "target_return": self.target_return,
            "cells": {
                regime: {str(seed): m.to_dict() for seed, m in by_seed.items()}
                for regime, by_seed in self.cells.items()
            },
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("report_version") != REPORT_VERSION:
            raise ValueError(f"unsupported report version {d.get('report_version')!r}")
        cells = {
            regime: {int(seed): RunMetrics.from_dict(m) for seed, m in by_seed.items()}
            for regime, by_seed in d["cells"].items()
        }
        return cls(
            env_id=d["env_id"], fraction=d["fraction"], quality=d["quality"],
            seeds=tuple(d["seeds"]), regimes=tuple(d["regimes"]),
            budget=d["budget"], target_return=d["target_return"], cells=cells,
        )


def run_cell(env_id, regime_name, seed, quality, cfg, progress=None):
    """One (regime, seed) training cell, self-contained and reproducible."""
    env = make_env(env_id)
    regime = Regime(regime_name)
    if progress:
        progress(f"[{env_id}] {regime_name} seed={seed} ...")
    if not regime.pretrained_actor:
        actor, critic = fresh_networks(env.spec, seed)
        return finetune(env, actor, critic, regime, cfg.ppo, seed)
    controller = expert_for(env_id, quality)
    n_rol = cfg.n_rol if regime.pretrained_critic else 0
    actor, critic, info = pretrain_pipeline(
        env, controller, cfg.n_exp, n_rol, cfg.pretrain, seed
    )
    return finetune(env, actor, critic, regime, cfg.ppo, seed,
                    n_exp=info["n_exp"], n_rol=info["n_rol"])


def run_comparison(cfg, progress=None):
    """All (regime, seed) cells on one env with a common calibrated expert.

    Expert data per seed is identical across pretraining regimes (same
    collection seed); per-cell failures are recorded and do not abort the
    rest of the comparison.
    """
    calib = calibrate_expert(cfg.env_id, cfg.expert_fraction,
                             seed=derive_seed(0, "calibration", cfg.env_id))
    cells = {regime: {} for regime in cfg.regimes}
    failures = []
    for seed in cfg.seeds:
        for regime in cfg.regimes:
            try:
                cells[regime][seed] = run_cell(cfg.env_id, regime, seed,
                                               calib.quality, cfg, progress)
            except Exception as exc:  # record, keep the report usable
                failures.append((regime, seed, repr(exc)))
                cells[regime][seed] = RunMetrics()
    report = ComparisonReport(
        env_id=cfg.env_id, fraction=cfg.expert_fraction, quality=calib.quality,
        seeds=tuple(cfg.seeds), regimes=tuple(cfg.regimes),
        budget=cfg.ppo.max_env_steps,
        target_return=make_env(cfg.env_id).spec.target_return, cells=cells,
        failures=failures,
    )
    return report


def random_policy_return(env_id, episodes=30, seed=0):
    """Mean return of uniform-random actions; the calibration floor."""
    env = make_env(env_id)
    returns = np.empty(episodes)
    for i in range(episodes):
        obs = env.reset(derive_seed(seed, "random-episode", i))
        rng = rng_for(seed, "random-actions", i)
        total = 0.0
        while True:
            action = rng.uniform(-1.0, 1.0, env.spec.act_dim)
            result = env.step(action, env.spec.horizon)
            total += result.reward
            obs = result.next_obs
            if result.done:
                break
        returns[i] = total
    return float(returns.mean())


def sweep_expert_steps(env_id, grid, cfg, seed=0, progress=None):
    """BC-only return over the amount of expert data, normalized to [0, 1].

    Uses the full-quality expert; normalization anchors the untrained
    policy's return at 0 and the target return at 1, so the n_exp = 0 grid
    point is 0 by construction.
    """
    if not grid:
        raise ValueError("grid must be non-empty")
    env = make_env(env_id)
    target = env.spec.target_return
    controller = expert_for(env_id, 1.0)
    eval_env = make_env(env_id)
    eval_seed = derive_seed(seed, "sweep-eval")

    actor0, _ = fresh_networks(env.spec, seed)
    anchor, _ = evaluate(eval_env, actor0, cfg.ppo.eval_episodes, eval_seed)

    def normalize(ret):
        return (ret - anchor) / (target - anchor)

    curve = []
    for n_exp in grid:
        if progress:
            progress(f"[{env_id}] BC sweep n_exp={n_exp} ...")
        if n_exp == 0:
            curve.append({"n_exp": 0, "n_exp_actual": 0, "mean_return": anchor,
                          "normalized_return": 0.0})
            continue
        dataset = collect_expert(make_env(env_id), controller, n_exp,
                                 derive_seed(seed, "sweep-expert", n_exp))
        actor, _ = fresh_networks(env.spec, seed)
        bc_pretrain(actor, dataset, cfg.pretrain,
                    seed=derive_seed(seed, "sweep-bc", n_exp))
        mean, _ = evaluate(eval_env, actor, cfg.ppo.eval_episodes, eval_seed)
        curve.append({"n_exp": n_exp, "n_exp_actual": dataset.total_steps,
                      "mean_return": mean, "normalized_return": normalize(mean)})
    return curve


def sweep_rollout_steps(env_id, grid, cfg, seeds=(0, 1, 2), progress=None):
    """Total steps to target over the rollout budget used for the critic.

    The grid must include 0 (the actor-only baseline). Runs the full
    pretrain + fine-tune pipeline per (n_rol, seed); failed runs keep their
    recorded n_tot (budget plus pretraining) and are flagged.
    """
    if 0 not in grid:
        raise ValueError("rollout grid must include 0 for the no-rollout baseline")
    calib = calibrate_expert(env_id, cfg.expert_fraction,
                             seed=derive_seed(0, "calibration", env_id))
    rows = []
    for n_rol in grid:
        per_seed = []
        for seed in seeds:
            if progress:
                progress(f"[{env_id}] rollout sweep n_rol={n_rol} seed={seed} ...")
            cell_cfg = dataclasses.replace(cfg, n_rol=n_rol)
            regime = "ACP" if n_rol > 0 else "AP"
            metrics = run_cell(env_id, regime, seed, calib.quality, cell_cfg)
            per_seed.append(metrics)
        rows.append({
            "n_rol": n_rol,
            "n_tot": [m.n_tot for m in per_seed],
            "reached": [m.reached_target for m in per_seed],
            "median_n_tot": statistics.median(m.n_tot for m in per_seed),
        })
    best = min(rows, key=lambda r: r["median_n_tot"])
    for row in rows:
        row["is_minimum"] = row is best
    return rows


def format_comparison_table(report):
    """Plain-text table mirroring the step-ledger columns."""
    regimes = [r for r in TABLE_REGIME_ORDER if r in report.cells]
    lines = [
        f"Environment: {report.env_id}   target return: {report.target_return}",
        f"expert fraction c = {report.fraction} (quality knob "
        f"{report.quality:.4f}), seeds {list(report.seeds)}, "
        f"budget {report.budget} steps",
        "",
        f"{'regime':8} {'n_exp':>8} {'n_rol':>8} {'n_fro':>8} {'n_fine':>9} "
        f"{'n_tot':>9} {'reached':>8}",
    ]
    for regime in regimes:
        ms = report.metrics_list(regime)
        med = report.median_n_tot(regime)

        def median(attr):
            return int(statistics.median(getattr(m, attr) for m in ms))

        lines.append(
            f"{regime:8} {median('n_exp'):>8} {median('n_rol'):>8} "
            f"{median('n_fro'):>8} {median('n_fine'):>9} {int(med):>9} "
            f"{report.reached_count(regime):>5}/{len(report.seeds)}"
        )
    lines.append("")
    if "ACP" in report.cells:
        red = report.reductions("ACP")
        parts = [f"vs {b}: {100 * v:.1f}%" for b, v in red.items()]
        lines.append("sample reduction of ACP (median n_tot): " + ", ".join(parts))
        lines.append(
            "  (reduction vs a baseline that misses the target on a majority "
            "of seeds is 100% by convention)"
        )
    lines.append(
        "note: ledger columns are per-seed medians; expert calibration and "
        "evaluation episodes are excluded from every ledger"
    )
    return "\n".join(lines) + "\n"


def emit_report(report, output_dir, stem="comparison"):
    """Write table, structured results, and plot-ready curves; returns paths."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    table_path = out / f"{stem}.txt"
    table_path.write_text(format_comparison_table(report))
    paths.append(table_path)
    json_path = out / f"{stem}.json"
    json_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    paths.append(json_path)
    for regime, by_seed in report.cells.items():
        for seed, metrics in by_seed.items():
            curve_path = out / f"{stem}_{regime}_seed{seed}.csv"
            rows = ["step,mean_return,std_return"]
            rows += [f"{s},{m},{d}" for s, m, d in metrics.eval_curve]
            curve_path.write_text("\n".join(rows) + "\n")
            paths.append(curve_path)
    return paths


def collect_expert_to_file(env_id, quality, n_exp, seed, path):
    """CLI helper: collect expert data and persist it."""
    env = make_env(env_id)
    dataset = collect_expert(env, expert_for(env_id, quality), n_exp, seed)
    save_dataset(dataset, path)
    return dataset


# Config file handling ------------------------------------------------------

_SECTION_TYPES = {"ppo": PpoConfig, "pretrain": PretrainConfig}
_EXPERIMENT_KEYS = {
    "env": str,
    "regimes": lambda s: tuple(x.strip() for x in s.split(",") if x.strip()),
    "seeds": lambda s: tuple(int(x) for x in s.split(",") if x.strip()),
    "c": float,
    "n_exp": int,
    "n_rol": int,
    "output_dir": str,
}


def _coerce(value, annotation):
    if annotation in ("int", int):
        return int(value)
    if annotation in ("float", float):
        return float(value)
    if annotation in ("bool", bool):
        lowered = value.strip().lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if "float" in str(annotation):
        return float(value)
    return value


def load_experiment_config(path, env_id=None):
    """Parse the sectioned key=value config file into an ExperimentConfig.

    Every key is optional and falls back to the environment's recommended
    profile; unknown sections or keys are errors.
    """
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(path)
    sections = set(parser.sections())
    unknown = sections - {"experiment", "ppo", "pretrain"}
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")

    exp_values = {}
    if "experiment" in sections:
        for key, raw in parser.items("experiment"):
            if key not in _EXPERIMENT_KEYS:
                raise ValueError(f"unknown key {key!r} in [experiment]")
            exp_values[key] = _EXPERIMENT_KEYS[key](raw)
    env = exp_values.pop("env", env_id)
    if env is None:
        raise ValueError("config must set [experiment] env (or pass --env)")

    cfg = recommended_experiment(env)
    block_updates = {}
    for section, cls in _SECTION_TYPES.items():
        if section not in sections:
            continue
        fields = {f.name: f.type for f in dataclasses.fields(cls)}
        updates = {}
        for key, raw in parser.items(section):
            if key not in fields:
                raise ValueError(f"unknown key {key!r} in [{section}]")
            updates[key] = _coerce(raw, fields[key])
        block_updates[section] = dataclasses.replace(getattr(cfg, section), **updates)

    rename = {"c": "expert_fraction", "env": "env_id"}
    exp_kwargs = {rename.get(k, k): v for k, v in exp_values.items()}
    return dataclasses.replace(cfg, **exp_kwargs, **block_updates)
