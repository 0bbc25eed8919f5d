"""Command line entry point.

    gailbias gen-experts --env empty --out empty.aild
    gailbias train --config run.ini --out runs/ --seed 0
    gailbias eval --run runs/seed0 --episodes 50
    gailbias summarize --root runs/ --out summary.csv
    gailbias analyze --out bias.csv
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from gailbias import bias_analysis, harness
from gailbias.errors import GailBiasError
from gailbias.expert import generate_dataset, save_dataset
from gailbias.gridworld import ENV_IDS_BY_NAME, EnvSpec


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gailbias",
        description="Reward-shape bias experiments for adversarial imitation.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-experts", help="record planner demonstrations")
    gen.add_argument("--env", required=True, choices=sorted(ENV_IDS_BY_NAME))
    gen.add_argument("--out", required=True, type=Path)
    gen.add_argument("--n", type=int, default=1000, help="number of episodes")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--width", type=int)
    gen.add_argument("--height", type=int)

    train = sub.add_parser("train", help="train one seed of one configuration")
    train.add_argument("--config", required=True, type=Path)
    train.add_argument("--out", required=True, type=Path)
    train.add_argument("--seed", type=int, help="overrides [run] seed")

    ev = sub.add_parser("eval", help="evaluate a finished run")
    ev.add_argument("--run", required=True, type=Path)
    ev.add_argument("--episodes", type=int, default=20)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--greedy", action="store_true")

    summ = sub.add_parser("summarize", help="aggregate runs into a CSV table")
    summ.add_argument("--root", required=True, type=Path)
    summ.add_argument("--out", required=True, type=Path)

    ana = sub.add_parser("analyze", help="closed-form bias sweep to CSV")
    ana.add_argument("--out", required=True, type=Path)
    ana.add_argument("--max-path", type=int, default=20)
    return parser


def _cmd_gen_experts(args) -> int:
    spec = EnvSpec.make(args.env, width=args.width, height=args.height)
    dataset = generate_dataset(spec, args.n, args.seed)
    save_dataset(dataset, args.out)
    mean_len = dataset.n_transitions() / max(len(dataset.trajectories), 1)
    print(f"wrote {len(dataset.trajectories)} episodes "
          f"({dataset.n_transitions()} transitions, mean length {mean_len:.1f}) "
          f"to {args.out}")
    return 0


def _cmd_train(args) -> int:
    # a list-valued [run] seed key sweeps one run per seed
    seeds = [args.seed] if args.seed is not None \
        else harness.load_seed_list(args.config)
    for seed in seeds:
        cfg = harness.load_config(args.config, seed_override=seed)
        run_dir = args.out / f"seed{cfg.seed}"
        records = harness.run_experiment(cfg, run_dir)
        last = records[-1]
        print(f"{cfg.env.name}/{cfg.method} seed {cfg.seed}: "
              f"success {last['success_rate']:.2f} at {last['frames']} frames "
              f"-> {run_dir}")
    return 0


def _cmd_eval(args) -> int:
    policy, cfg = harness.load_run_policy(args.run)
    summary = harness.eval_policy(policy, cfg.env, args.episodes, args.seed,
                                  greedy=args.greedy)
    print(f"success_rate {summary.success_rate:.3f}  "
          f"mean_length {summary.mean_length:.1f}  "
          f"mean_env_reward {summary.mean_env_reward:.3f}")
    for kind, count in summary.by_kind().items():
        print(f"  {kind}: {count}")
    return 0


def _cmd_summarize(args) -> int:
    rows = harness.summarize_runs(args.root, args.out)
    present = [r for r in rows if r["seeds"]]
    print(f"wrote {len(rows)} cells ({len(present)} populated) to {args.out}")
    for r in present:
        print(f"  {r['env']}/{r['method']}: {r['success_mean']}"
              f" +- {r['success_std']} over {r['seeds']} seed(s)")
    return 0


def _cmd_analyze(args) -> int:
    gammas = [round(0.1 * i, 2) for i in range(10)] + [0.95, 0.99]
    rows = bias_analysis.bias_table(
        gammas, range(1, args.max_path + 1), [0.5, 1.0, 2.0])
    bias_analysis.write_bias_csv(rows, args.out)
    print(f"wrote {len(rows)} scenarios to {args.out}")
    print(f"survival bias threshold: {bias_analysis.survival_bias_threshold():.6f}")
    return 0


_COMMANDS = {
    "gen-experts": _cmd_gen_experts,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "summarize": _cmd_summarize,
    "analyze": _cmd_analyze,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except GailBiasError as exc:
        print(f"gailbias: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
