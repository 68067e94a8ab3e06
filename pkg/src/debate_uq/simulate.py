"""Verification sweeps over random belief worlds and consensus dynamics.

These drive the exactly-solvable machinery at scale: the additive
log-odds update on hundreds of random worlds, the heterogeneous-gain
ordering on random two-channel worlds, and the disagreement-decay /
noise-ramp behavior of conformist mock debates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .agents import MockBayesianAgent
from .beliefs import (
    VERDICT_HOLDS,
    VERDICT_INAPPLICABLE,
    VERDICT_VIOLATED,
    check_heterogeneous_gain,
    check_log_odds_update,
    consensus_world,
    random_belief_world,
    tilted_prior,
)
from .engine import run_debate_paired
from .errors import DegenerateOddsError, InconsistentEvidenceError
from .model import MODE_PAIRED, AgentSpec, DebateConfig, Problem, KIND_MOCK


@dataclass
class SweepResult:
    name: str
    trials: int
    max_residual: float = 0.0
    failures: int = 0
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.failures == 0


def run_log_odds_sweep(
    trials: int = 500, seed: int = 0, tol: float = 1e-12
) -> SweepResult:
    """Random worlds, one observed message each; residual must sit at tol."""
    rng = np.random.default_rng(seed)
    result = SweepResult(name="log-odds", trials=trials)
    done = 0
    while done < trials:
        world = random_belief_world(
            rng,
            n_hypotheses=int(rng.integers(2, 6)),
            n_answers=int(rng.integers(2, 6)),
        )
        channel = world.channel("peer")
        message = channel.symbols[int(rng.integers(len(channel.symbols)))]
        try:
            check = check_log_odds_update(world, message)
        except (DegenerateOddsError, InconsistentEvidenceError):
            continue  # dense Dirichlet worlds essentially never degenerate
        done += 1
        result.max_residual = max(result.max_residual, check.residual)
        if check.residual > tol:
            result.failures += 1
    return result


def run_hetero_gain_sweep(
    trials: int = 1000, seed: int = 0, tol: float = 1e-12
) -> SweepResult:
    """Random two-channel worlds filtered to the novelty condition.

    Counts every world where the novelty condition holds but the bundled
    heterogeneous gain falls short as a failure; also tracks the worst
    chain-rule residual across all worlds.
    """
    rng = np.random.default_rng(seed)
    result = SweepResult(name="hetero-gain", trials=trials)
    applicable = holds = violated = 0
    for _ in range(trials):
        world = random_belief_world(
            rng,
            n_hypotheses=int(rng.integers(2, 6)),
            n_answers=int(rng.integers(2, 5)),
            channel_specs={
                "homo": int(rng.integers(2, 5)),
                "hetero": int(rng.integers(2, 5)),
            },
        )
        check = check_heterogeneous_gain(world, tol=tol)
        result.max_residual = max(result.max_residual, check.chain_residual)
        if check.chain_residual > tol:
            result.failures += 1
        if check.verdict == VERDICT_INAPPLICABLE:
            continue
        applicable += 1
        if check.verdict == VERDICT_HOLDS:
            holds += 1
        elif check.verdict == VERDICT_VIOLATED:
            violated += 1
            result.failures += 1
    result.details = {
        "applicable": applicable,
        "holds": holds,
        "violated": violated,
        "inapplicable": trials - applicable,
    }
    return result


@dataclass
class ConsensusSummary:
    debates: int
    mean_epistemic: tuple[float, ...]  # indexed by turn - 1
    mean_aleatoric: tuple[float, ...]
    mean_total: tuple[float, ...]


def _demo_problem(idx: int) -> Problem:
    return Problem(
        problem_id=f"sim-{idx}",
        question=f"Simulated disagreement case {idx}: pick the supported value.",
        ground_truth="a0",
    )


def run_consensus_sim(
    debates: int = 200,
    seed: int = 0,
    conformity: float = 0.5,
    emission_noise: float = 0.0,
    noise_schedule: "tuple[float, ...] | None" = None,
    n_turns: int = 5,
    n_rollouts: int = 16,
    n_answers: int = 4,
    sharpness: float = 0.85,
    prior_tilt: float = 0.6,
) -> ConsensusSummary:
    """Two mock agents with clashing priors debate repeatedly.

    Returns per-turn means over all debates. With conformity > 0 and no
    noise ramp the disagreement term should shrink turn over turn; with a
    rising noise schedule the per-agent entropy term should grow instead.
    """
    config = DebateConfig(
        n_agents=2,
        n_turns=n_turns,
        n_rollouts=n_rollouts,
        rollout_mode=MODE_PAIRED,
    )
    answers = tuple(f"a{i}" for i in range(n_answers))
    world = consensus_world(answers, correct_answer="a0", sharpness=sharpness)
    sums = {
        "epistemic": [0.0] * n_turns,
        "aleatoric": [0.0] * n_turns,
        "total": [0.0] * n_turns,
    }
    for d in range(debates):
        agents = []
        for i in range(2):
            spec = AgentSpec(agent_id=i, kind=KIND_MOCK)
            agents.append(
                MockBayesianAgent(
                    spec=spec,
                    world=world,
                    posterior=tilted_prior(n_answers, favored=i % n_answers, tilt=prior_tilt),
                    conformity=conformity,
                    emission_noise=emission_noise,
                    noise_schedule=noise_schedule,
                )
            )
        transcript = run_debate_paired(
            _demo_problem(d), agents, config, seed=seed + d
        )
        for rep in transcript.reports:
            sums["epistemic"][rep.turn - 1] += rep.epistemic
            sums["aleatoric"][rep.turn - 1] += rep.aleatoric
            sums["total"][rep.turn - 1] += rep.total
    return ConsensusSummary(
        debates=debates,
        mean_epistemic=tuple(s / debates for s in sums["epistemic"]),
        mean_aleatoric=tuple(s / debates for s in sums["aleatoric"]),
        mean_total=tuple(s / debates for s in sums["total"]),
    )


def format_sweep(result: SweepResult) -> str:
    status = "ok" if result.passed else "FAILED"
    line = (
        f"[{status}] {result.name}: {result.trials} trials, "
        f"max residual {result.max_residual:.3e}, {result.failures} failures"
    )
    if result.details:
        extras = ", ".join(f"{k}={v}" for k, v in result.details.items())
        line += f" ({extras})"
    return line


def format_consensus(summary: ConsensusSummary, label: str) -> list[str]:
    lines = [f"{label}: {summary.debates} debates"]
    for t in range(len(summary.mean_epistemic)):
        lines.append(
            f"  turn {t + 1}: total={summary.mean_total[t]:.4f} "
            f"epistemic={summary.mean_epistemic[t]:.4f} "
            f"aleatoric={summary.mean_aleatoric[t]:.4f}"
        )
    first, last = summary.mean_epistemic[0], summary.mean_epistemic[-1]
    lines.append(
        f"  epistemic turn1={first:.4f} -> turn{len(summary.mean_epistemic)}={last:.4f}"
        f" ({'decayed' if last < first else 'did not decay'})"
    )
    return lines
