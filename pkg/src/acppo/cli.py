"""Command-line entry points for the library."""

import argparse
import json
import sys
from pathlib import Path

from . import _kernels, harness, nn, ppo, pretrain
from .data import load_dataset, save_dataset
from .envs import env_catalog, expert_for, make_env
from .rlmath import StepLimitSpec, extended_step_limit
from .seeding import derive_seed


def _int_list(text):
    return [int(x) for x in text.split(",") if x.strip()]


def cmd_describe(args):
    env = make_env(args.env)
    spec = env.spec
    print(f"env: {spec.env_id}")
    print(f"  obs_dim: {spec.obs_dim}  act_dim: {spec.act_dim}")
    print(f"  nominal_horizon: {spec.horizon}")
    print(f"  r_max: {spec.r_max}")
    print(f"  target_return: {spec.target_return}")
    print(f"  supports_extension: {spec.supports_extension}")
    print("  constants:")
    for key, value in env.describe().items():
        print(f"    {key}: {value}")


def cmd_steplimit(args):
    spec = StepLimitSpec(args.horizon, args.r_max, args.tau)
    t_ext = extended_step_limit(spec, args.gamma)
    tail = spec.r_max * args.gamma ** (t_ext - spec.horizon) / (1 - args.gamma)
    print(f"extended step limit: {t_ext} (nominal horizon {spec.horizon})")
    print(f"worst-case return tail after extension: {tail:.6g} <= tau={spec.tau}")


def cmd_calibrate(args):
    result = harness.calibrate_expert(args.env, args.c, seed=args.seed)
    print(f"quality knob: {result.quality:.6f}")
    print(f"mean return over {harness.CALIBRATION_EPISODES} episodes: "
          f"{result.mean_return:.4f}")
    print(f"expert target ({args.c} of target return): {result.expert_target:.4f}")


def cmd_expert_collect(args):
    if args.quality is None:
        quality = harness.calibrate_expert(args.env, args.c, seed=args.seed).quality
    else:
        quality = args.quality
    env = make_env(args.env)
    dataset = pretrain.collect_expert(env, expert_for(args.env, quality),
                                      args.steps, args.seed)
    save_dataset(dataset, args.out)
    print(f"collected {dataset.total_steps} expert steps "
          f"({len(dataset.episodes)} episodes, quality {quality:.4f}) -> {args.out}")


def cmd_pretrain(args):
    dataset = load_dataset(args.data)
    if dataset.env_id != args.env:
        raise SystemExit(f"dataset is for env {dataset.env_id!r}, not {args.env!r}")
    env = make_env(args.env)
    cfg = harness.recommended_experiment(args.env).pretrain
    actor, critic = ppo.fresh_networks(env.spec, args.seed)
    bc_curve = pretrain.bc_pretrain(actor, dataset, cfg,
                                    seed=derive_seed(args.seed, "bc"))
    print(f"BC final train mse: {bc_curve[-1][0]:.6g}")
    n_rol_actual = 0
    if args.rollout_steps > 0:
        tau = pretrain.default_tau(env.spec)
        rollouts = pretrain.collect_rollouts(env, actor, args.rollout_steps,
                                             cfg.gamma, tau,
                                             derive_seed(args.seed, "rollout"))
        n_rol_actual = rollouts.total_steps
        curve = pretrain.critic_pretrain(critic, rollouts, cfg,
                                         seed=derive_seed(args.seed, "critic"))
        print(f"critic final train mse: {curve[-1][0]:.6g} "
              f"({n_rol_actual} rollout steps)")
    nn.save_checkpoint(actor, critic, args.out)
    print(f"saved checkpoint -> {args.out} "
          f"(n_exp={dataset.total_steps}, n_rol={n_rol_actual})")


def cmd_finetune(args):
    env = make_env(args.env)
    cfg = harness.recommended_experiment(args.env).ppo
    if args.budget is not None:
        cfg = ppo.config_with(cfg, max_env_steps=args.budget)
    if args.checkpoint:
        actor, critic = nn.load_checkpoint(args.checkpoint)
    else:
        if args.regime != "NP":
            raise SystemExit(f"regime {args.regime} requires --checkpoint")
        actor, critic = ppo.fresh_networks(env.spec, args.seed)
    metrics = ppo.finetune(env, actor, critic, args.regime, cfg, args.seed,
                           n_exp=args.n_exp, n_rol=args.n_rol,
                           target_return=args.target)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(metrics.to_dict(), indent=2) + "\n")
    curve = out.with_suffix(".csv")
    rows = ["step,mean_return,std_return"]
    rows += [f"{s},{m},{d}" for s, m, d in metrics.eval_curve]
    curve.write_text("\n".join(rows) + "\n")
    status = "reached target" if metrics.reached_target else "budget exhausted"
    print(f"{status}: n_tot={metrics.n_tot} "
          f"(n_exp={metrics.n_exp} n_rol={metrics.n_rol} "
          f"n_fro={metrics.n_fro} n_fine={metrics.n_fine})")
    print(f"wrote {out} and {curve}")


def cmd_compare(args):
    if args.config:
        cfg = harness.load_experiment_config(args.config, env_id=args.env)
    else:
        if not args.env:
            raise SystemExit("compare needs an env id or --config")
        cfg = harness.recommended_experiment(args.env)
    if args.seeds:
        import dataclasses

        cfg = dataclasses.replace(cfg, seeds=tuple(args.seeds))
    report = harness.run_comparison(cfg, progress=print)
    paths = harness.emit_report(report, args.outdir)
    print(harness.format_comparison_table(report))
    for regime, seed, err in report.failures:
        print(f"FAILED cell {regime} seed={seed}: {err}", file=sys.stderr)
    print("wrote: " + ", ".join(str(p) for p in paths))


def cmd_sweep_expert(args):
    cfg = harness.recommended_experiment(args.env)
    curve = harness.sweep_expert_steps(args.env, args.grid, cfg, seed=args.seed,
                                       progress=print)
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"sweep_expert_{args.env}.csv"
    rows = ["n_exp,n_exp_actual,mean_return,normalized_return"]
    rows += [f"{r['n_exp']},{r['n_exp_actual']},{r['mean_return']},"
             f"{r['normalized_return']}" for r in curve]
    path.write_text("\n".join(rows) + "\n")
    for r in curve:
        print(f"n_exp={r['n_exp']:>7} -> return {r['mean_return']:9.3f} "
              f"(normalized {r['normalized_return']:.3f})")
    print(f"wrote {path}")


def cmd_sweep_rollout(args):
    cfg = harness.recommended_experiment(args.env)
    rows = harness.sweep_rollout_steps(args.env, args.grid, cfg,
                                       seeds=tuple(args.seeds), progress=print)
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"sweep_rollout_{args.env}.csv"
    lines = ["n_rol,median_n_tot,n_tot_per_seed,reached_per_seed,is_minimum"]
    for r in rows:
        lines.append(
            f"{r['n_rol']},{r['median_n_tot']},"
            f"\"{r['n_tot']}\",\"{r['reached']}\",{int(r['is_minimum'])}"
        )
    path.write_text("\n".join(lines) + "\n")
    for r in rows:
        marker = "  <- minimum" if r["is_minimum"] else ""
        print(f"n_rol={r['n_rol']:>7} -> median n_tot {r['median_n_tot']:.0f}"
              f"{marker}")
    print(f"wrote {path}")


def cmd_bench(args):
    from .bench import run_benchmark

    run_benchmark(repeats=args.repeats)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="acppo",
        description="Actor-critic pretraining for PPO on desk-scale control tasks",
    )
    parser.add_argument("--version", action="version", version="acppo 0.1.0")
    sub = parser.add_subparsers(dest="command", required=True)

    env_ids = [spec.env_id for spec in env_catalog()]

    p = sub.add_parser("describe", help="print an env's spec and constants")
    p.add_argument("env", choices=env_ids)
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("steplimit", help="extended step limit for T, gamma, r_max, tau")
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--r-max", dest="r_max", type=float, required=True)
    p.add_argument("--tau", type=float, required=True)
    p.set_defaults(func=cmd_steplimit)

    p = sub.add_parser("calibrate", help="tune the expert knob to a target fraction")
    p.add_argument("env", choices=env_ids)
    p.add_argument("--c", type=float, default=0.65)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("expert-collect", help="collect expert demonstrations")
    p.add_argument("env", choices=env_ids)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--quality", type=float, default=None,
                   help="expert knob; default: calibrate to --c")
    p.add_argument("--c", type=float, default=0.65)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_expert_collect)

    p = sub.add_parser("pretrain", help="BC + critic pretraining from a dataset file")
    p.add_argument("env", choices=env_ids)
    p.add_argument("--data", required=True)
    p.add_argument("--rollout-steps", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("finetune", help="PPO fine-tuning of a checkpoint")
    p.add_argument("env", choices=env_ids)
    p.add_argument("--regime", choices=ppo.REGIME_NAMES, required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--target", type=float, default=None,
                   help="override the env's target return")
    p.add_argument("--n-exp", dest="n_exp", type=int, default=0,
                   help="pretraining expert steps for the ledger")
    p.add_argument("--n-rol", dest="n_rol", type=int, default=0,
                   help="pretraining rollout steps for the ledger")
    p.add_argument("--out", required=True, help="metrics JSON path")
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("compare", help="run the regime comparison")
    p.add_argument("env", nargs="?", choices=env_ids)
    p.add_argument("--config", default=None)
    p.add_argument("--seeds", type=_int_list, default=None)
    p.add_argument("--outdir", default="results")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep-expert", help="BC return over expert-data amounts")
    p.add_argument("env", choices=env_ids)
    p.add_argument("--grid", type=_int_list, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--outdir", default="results")
    p.set_defaults(func=cmd_sweep_expert)

    p = sub.add_parser("sweep-rollout", help="n_tot over rollout-data amounts")
    p.add_argument("env", choices=env_ids)
    p.add_argument("--grid", type=_int_list, required=True)
    p.add_argument("--seeds", type=_int_list, default=[0, 1, 2])
    p.add_argument("--outdir", default="results")
    p.set_defaults(func=cmd_sweep_rollout)

    p = sub.add_parser("bench", help="compare the kernel backends")
    p.add_argument("--repeats", type=int, default=5)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    print(f"kernel backend: {_kernels.BACKEND}", file=sys.stderr)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
