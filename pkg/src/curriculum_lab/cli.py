"""Command line entry point: ``curriculum-lab {train,eval,bench,compare}``.

Exit codes: 0 ok, 1 config error, 2 runtime error, 3 conservation violation.
``CURRICULA_SEED`` overrides the configured seeds and ``CURRICULA_LOG`` sets
the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .compare import aggregate, read_curve, write_aggregate
from .config import ConfigError, ExperimentConfig, make_env
from .curricula import Constant
from .learner import TabularPolicy, evaluate
from .sync import bench_overhead
from .training import run_training

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_CONSERVATION = 0, 1, 2, 3

log = logging.getLogger("curriculum_lab")


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    seeds = None
    env_seed = os.environ.get("CURRICULA_SEED")
    if env_seed is not None:
        try:
            seeds = [int(env_seed)]
        except ValueError:
            raise ConfigError(f"CURRICULA_SEED must be an integer, got {env_seed!r}") from None
    if getattr(args, "seed", None) is not None:
        seeds = [args.seed]
    return cfg.with_overrides(
        seeds=seeds,
        total_episodes=getattr(args, "episodes", None),
        workers=getattr(args, "workers", None),
        output_dir=getattr(args, "output_dir", None),
        sync_delay=getattr(args, "delay", None),
        sync_mode=getattr(args, "mode", None),
    )


def cmd_train(args) -> int:
    cfg = _load_config(args)
    root = Path(cfg.output_dir) if cfg.output_dir else None
    status = EXIT_OK
    for seed in cfg.seeds:
        out = None if root is None else (root / f"seed{seed}" if len(cfg.seeds) > 1 else root)
        try:
            result = run_training(cfg, seed, out)
        except KeyboardInterrupt:
            log.warning("interrupted")
            return EXIT_RUNTIME
        summary = result.summary(cfg.curriculum["type"])
        print(json.dumps({"seed": seed, **summary}, sort_keys=True))
        if not summary["conservation"].get("ok", False):
            log.error("conservation violated: %s", summary["conservation"])
            status = EXIT_CONSERVATION
    return status


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    ckpt = Path(args.checkpoint)
    try:
        logits = np.load(ckpt / "policy_logits.npy")
        values = np.load(ckpt / "policy_values.npy")
    except OSError as exc:
        raise ConfigError(f"cannot read checkpoint: {exc}") from None
    env = make_env(cfg.env, cfg.seeds[0])
    policy = TabularPolicy(*logits.shape)
    policy.logits, policy.values = logits, values
    if args.render == "text":
        task = env.task_space.from_flat(args.task)
        obs = env.reset(new_task=task)
        print(env.render())
        done = False
        while not done:
            obs, _, done, info = env.step(policy.act(env.obs_index(obs), None, greedy=True))
            print(env.render())
            done = done or bool(info.get("needs_task"))
    rates = evaluate(
        policy,
        env,
        episodes_per_task=cfg.learner.eval_episodes_per_task,
        greedy=cfg.learner.eval_greedy,
        seed=cfg.seeds[0],
    )
    print(json.dumps({"mean_success_rate": float(rates.mean()), "success_rates": rates.tolist()}))
    return EXIT_OK


def cmd_bench(args) -> int:
    env_spec = {"type": "grid"}
    if args.config:
        env_spec = ExperimentConfig.load(args.config).env

    def env_factory():
        return make_env(env_spec, 0)

    space = env_factory().task_space
    report = bench_overhead(
        env_factory, lambda: Constant(space, space.from_flat(args.task)), args.workers, args.episodes, args.repeats
    )
    print(f"workers={report['workers']} episodes/worker={report['episodes']}")
    print(f"baseline  {report['baseline_s']:.3f}s")
    print(f"episodic  {report['episodic_s']:.3f}s  ({100 * report['episodic_overhead']:+.1f}%)")
    print(f"step      {report['step_s']:.3f}s  ({100 * report['step_overhead']:+.1f}%)")
    if args.json:
        print(json.dumps(report))
    return EXIT_OK if report["conservation_ok"] else EXIT_CONSERVATION


def cmd_compare(args) -> int:
    curves = [read_curve(d, args.column) for d in args.run_dirs]
    table = aggregate(curves, seed=args.seed or 0)
    sys.stdout.write(write_aggregate(table, args.out))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="curriculum-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train one run per configured seed")
    train.add_argument("config")
    train.add_argument("--seed", type=int)
    train.add_argument("--episodes", type=int)
    train.add_argument("--workers", type=int)
    train.add_argument("--delay", type=int)
    train.add_argument("--mode", choices=["direct", "threaded"])
    train.add_argument("--output-dir")
    train.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="evaluate a saved policy over the whole task space")
    ev.add_argument("checkpoint", help="a run directory written by train")
    ev.add_argument("config")
    ev.add_argument("--seed", type=int)
    ev.add_argument("--render", choices=["text"])
    ev.add_argument("--task", type=int, default=0, help="flat index of the task to render")
    ev.set_defaults(func=cmd_eval)

    bench = sub.add_parser("bench", help="measure sync-layer overhead with a no-op curriculum")
    bench.add_argument("--config", help="take the env section from this config (default: SeededGrid)")
    bench.add_argument("--workers", type=int, default=8)
    bench.add_argument("--episodes", type=int, default=500)
    bench.add_argument("--repeats", type=int, default=7)
    bench.add_argument("--task", type=int, default=0, help="flat index of the constant task")
    bench.add_argument("--json", action="store_true")
    bench.set_defaults(func=cmd_bench)

    cmp_ = sub.add_parser("compare", help="aggregate runs into mean and bootstrap CI columns")
    cmp_.add_argument("run_dirs", nargs="+")
    cmp_.add_argument("--column", default="return")
    cmp_.add_argument("--out")
    cmp_.add_argument("--seed", type=int)
    cmp_.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("CURRICULA_LOG", "WARNING").upper(), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (OSError, RuntimeError, ValueError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
