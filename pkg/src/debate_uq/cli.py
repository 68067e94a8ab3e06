"""Command line entry points.

Exit codes: 0 on success, 1 on a runtime failure (agent, backend, or
data problem), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence

from .agents import make_agent
from .config import ExperimentConfig, apply_overrides, load_experiment_config
from .engine import run_debate_paired, run_debate_probe
from .errors import DebateError
from .model import MODE_PAIRED, MODE_PROBE, Problem, Transcript
from .rewards import RewardConfig, compute_advantages
from .simulate import (
    format_consensus,
    format_sweep,
    run_consensus_sim,
    run_hetero_gain_sweep,
    run_log_odds_sweep,
)
from .storage import (
    export_metrics,
    export_training_batch,
    load_dataset,
    load_transcript,
    save_transcript,
)

_SUITES = ("log-odds", "hetero-gain", "eu-decay", "all")


def _safe_name(problem_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", problem_id) or "problem"


def _run_one(problem: Problem, config: ExperimentConfig) -> Transcript:
    agents = [make_agent(spec, problem) for spec in config.agents]
    if config.debate.rollout_mode == MODE_PROBE:
        return run_debate_probe(problem, agents, config.debate, seed=config.seed)
    return run_debate_paired(problem, agents, config.debate, seed=config.seed)


def _cmd_run(args: argparse.Namespace, mode: str) -> int:
    config = load_experiment_config(args.config)
    config = apply_overrides(
        config,
        dataset=args.dataset,
        out_dir=args.out,
        seed=args.seed,
        parallel=args.parallel,
        bits=args.bits or None,
        n_agents=args.n_agents,
        n_turns=args.n_turns,
        n_rollouts=args.n_rollouts,
        rollout_mode=mode,
    )
    problems = load_dataset(config.dataset)
    transcript_dir = os.path.join(config.out_dir, "transcripts")
    os.makedirs(transcript_dir, exist_ok=True)

    if config.parallel > 1:
        with ThreadPoolExecutor(max_workers=config.parallel) as pool:
            transcripts = list(pool.map(lambda p: _run_one(p, config), problems))
    else:
        transcripts = [_run_one(p, config) for p in problems]

    for transcript in transcripts:
        path = os.path.join(transcript_dir, f"{_safe_name(transcript.problem_id)}.jsonl")
        save_transcript(transcript, path)

    metrics_dir = os.path.join(config.out_dir, "metrics")
    paths = export_metrics(transcripts, metrics_dir, bits=config.bits)
    unit = "bits" if config.bits else "nats"
    print(f"ran {len(transcripts)} debates ({mode}, unit={unit})")
    print(f"transcripts: {transcript_dir}")
    print(f"metrics: {paths.turn_csv}")
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    suite = args.suite
    failed = False
    if suite in ("log-odds", "all"):
        result = run_log_odds_sweep(trials=args.trials, seed=args.seed)
        print(format_sweep(result))
        failed = failed or not result.passed
    if suite in ("hetero-gain", "all"):
        result = run_hetero_gain_sweep(trials=args.trials, seed=args.seed)
        print(format_sweep(result))
        failed = failed or not result.passed
    if suite in ("eu-decay", "all"):
        summary = run_consensus_sim(debates=args.debates, seed=args.seed)
        print("\n".join(format_consensus(summary, "eu-decay")))
        decayed = summary.mean_epistemic[-1] < summary.mean_epistemic[0]
        failed = failed or not decayed
    return 1 if failed else 0


def _cmd_rewards(args: argparse.Namespace) -> int:
    transcript = load_transcript(args.transcript)
    overrides = {}
    if args.alpha_au is not None:
        overrides["alpha_au"] = args.alpha_au
    if args.eta is not None:
        overrides["eta"] = args.eta
    config = RewardConfig(**overrides)
    records = compute_advantages(transcript, config)
    out_path = args.out or os.path.splitext(args.transcript)[0] + ".batch.jsonl"
    export_training_batch(transcript, records, out_path)
    print(f"wrote {len(records)} advantage records to {out_path}")
    return 0


def _cmd_analyze(args: argparse.Namespace) -> int:
    transcripts = [load_transcript(path) for path in args.transcript]
    paths = export_metrics(transcripts, args.out, bits=args.bits)
    print(f"analyzed {len(transcripts)} transcripts")
    print(f"metrics: {paths.turn_csv}")
    print(f"flips: {paths.flip_csv}")
    return 0


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="experiment TOML")
    parser.add_argument("--dataset", help="override dataset path")
    parser.add_argument("--out", help="override output directory")
    parser.add_argument("--seed", type=int, help="override base seed")
    parser.add_argument("--parallel", type=int, help="worker threads across problems")
    parser.add_argument("-N", "--n-agents", type=int, help="override agent count")
    parser.add_argument("-T", "--n-turns", type=int, help="override turn count")
    parser.add_argument("-K", "--n-rollouts", type=int, help="override rollout count")
    parser.add_argument("--bits", action="store_true", help="report metrics in bits")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="debate-uq",
        description="Run multi-agent debates and analyze their uncertainty.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_debate = sub.add_parser("debate", help="run paired debate rollouts")
    _add_run_flags(p_debate)

    p_probe = sub.add_parser("probe", help="run one debate with per-turn probes")
    _add_run_flags(p_probe)

    p_sim = sub.add_parser("simulate", help="numerical verification sweeps")
    p_sim.add_argument(
        "--suite",
        default="all",
        choices=_SUITES,
        help="which sweep to run",
    )
    p_sim.add_argument("--trials", type=int, default=500)
    p_sim.add_argument("--debates", type=int, default=50)
    p_sim.add_argument("--seed", type=int, default=0)

    p_rewards = sub.add_parser("rewards", help="compute advantages for a transcript")
    p_rewards.add_argument("--transcript", required=True)
    p_rewards.add_argument("--alpha-au", type=float, default=None)
    p_rewards.add_argument("--eta", type=float, default=None)
    p_rewards.add_argument("--out", help="training batch output path")

    p_analyze = sub.add_parser("analyze", help="export metrics from saved transcripts")
    p_analyze.add_argument("--transcript", nargs="+", required=True)
    p_analyze.add_argument("--out", required=True, help="metrics output directory")
    p_analyze.add_argument("--bits", action="store_true")

    return parser


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help, 2 for usage errors
        return int(exc.code or 0)
    try:
        if args.command == "debate":
            return _cmd_run(args, MODE_PAIRED)
        if args.command == "probe":
            return _cmd_run(args, MODE_PROBE)
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "rewards":
            return _cmd_rewards(args)
        if args.command == "analyze":
            return _cmd_analyze(args)
    except (DebateError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError(f"unhandled command {args.command!r}")


def main() -> None:
    raise SystemExit(cli_main())


if __name__ == "__main__":
    main()
