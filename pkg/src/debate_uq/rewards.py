"""Reward shaping and advantage export for group-relative policy training.

The pipeline turns a paired-trajectories transcript into per-response
records an external trainer can consume directly:

- r_correct: binary grade of the final answer,
- r_intrinsic: epistemic bonus paid to a turn-t response when peers'
  accuracy improves at turn t+1 (zero at the final trainable turn),
- advantage: group-standardized total reward across the K rollouts of the
  same (agent, turn),
- weight: exp(-alpha_au * standardized mean token NLL), an aleatoric
  discount computed from the response's own token logprobs,
- shaped_advantage: weight * advantage, exactly.

Everything here is a pure function of its inputs; nothing reads state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .answers import CanonicalAnswer, answers_equivalent, normalize_answer
from .errors import DebateError, MissingLogprobsError, ValidationError
from .model import MODE_PAIRED, Response, Transcript


@dataclass(frozen=True)
class RewardConfig:
    alpha_au: float = 0.25
    eta: float = 0.25
    eps_std: float = 1e-6
    clip_eps: float = 0.2
    kl_beta: float = 0.001
    train_horizon: Optional[int] = None  # defaults to the transcript's turn count

    def __post_init__(self) -> None:
        if self.alpha_au < 0.0:
            raise ValidationError("alpha_au must be >= 0")
        if self.eta < 0.0:
            raise ValidationError("eta must be >= 0")
        if self.eps_std <= 0.0:
            raise ValidationError("eps_std must be positive")
        if not (0.0 < self.clip_eps < 1.0):
            raise ValidationError("clip_eps must be in (0, 1)")
        if self.kl_beta < 0.0:
            raise ValidationError("kl_beta must be >= 0")
        if self.train_horizon is not None and self.train_horizon < 1:
            raise ValidationError("train_horizon must be >= 1")


@dataclass(frozen=True)
class AdvantageRecord:
    """Final per-response training signal. shaped = weight * advantage."""

    problem_id: str
    agent_id: int
    turn: int
    trajectory_id: int
    reward_correct: float
    reward_intrinsic: float
    reward_total: float
    advantage: float
    weight: float
    shaped_advantage: float
    nll_mean: Optional[float] = None
    nll_standardized: Optional[float] = None
    nll_missing: bool = False

    def __post_init__(self) -> None:
        if self.weight <= 0.0:
            raise ValidationError("weight must be positive")
        if self.shaped_advantage != self.weight * self.advantage:
            raise ValidationError("shaped_advantage must equal weight * advantage")
        if self.reward_total != self.reward_correct + self.reward_intrinsic:
            raise ValidationError("reward_total must equal correct + intrinsic parts")
        if self.nll_missing and self.nll_mean is not None:
            raise ValidationError("flagged records cannot carry an NLL")
        if not self.nll_missing and self.nll_mean is None:
            raise ValidationError("unflagged records need their NLL provenance")


def correctness_reward(
    response: Response, ground_truth: "CanonicalAnswer | str"
) -> float:
    """1.0 when the response's extracted answer matches the ground truth."""
    truth = (
        ground_truth
        if isinstance(ground_truth, CanonicalAnswer)
        else normalize_answer(ground_truth)
    )
    if response.extracted_answer is None:
        return 0.0
    return 1.0 if answers_equivalent(normalize_answer(response.extracted_answer), truth) else 0.0


def mean_token_nll(token_logprobs: Optional[Sequence[float]]) -> float:
    """Mean negative log-likelihood per token.

    Raises instead of defaulting when logprobs are absent; silently
    invented confidence would poison the aleatoric weighting.
    """
    if token_logprobs is None or len(token_logprobs) == 0:
        raise MissingLogprobsError("NLL unavailable: response carries no token logprobs")
    for lp in token_logprobs:
        if lp > 0.0:
            raise ValidationError(f"token logprob {lp!r} above 0")
    return -math.fsum(token_logprobs) / len(token_logprobs)


def _standardize(values: Sequence[float], eps: float) -> tuple[float, ...]:
    n = len(values)
    if n == 0:
        raise ValidationError("cannot standardize an empty group")
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / n
    std = math.sqrt(var)
    return tuple((v - mean) / (std + eps) for v in values)


def standardize_nll(nlls: Sequence[float], eps_std: float = 1e-6) -> tuple[float, ...]:
    """Center and scale raw NLLs within their group (population std)."""
    if eps_std < 0.0:
        raise ValidationError("eps_std must be >= 0")
    return _standardize(nlls, eps_std)


def aleatoric_weight(nll_standardized: float, alpha_au: float) -> float:
    """exp(-alpha_au * standardized NLL); discounts noisy-looking responses."""
    if alpha_au < 0.0:
        raise ValidationError("alpha_au must be >= 0")
    return math.exp(-alpha_au * nll_standardized)


def group_advantage(rewards: Sequence[float], eps_std: float = 1e-6) -> tuple[float, ...]:
    """Group-standardized rewards: (r - mean) / (population std + eps)."""
    if eps_std < 0.0:
        raise ValidationError("eps_std must be >= 0")
    return _standardize(rewards, eps_std)


def shaped_advantage(advantage: float, weight: float) -> float:
    if weight <= 0.0:
        raise ValidationError("weight must be positive")
    return weight * advantage


def peer_improvement(
    transcript: Transcript, donor: int, peer: int, turn: int
) -> float:
    """Mean correctness change of *peer* from turn to turn+1, over threads
    whose next-turn context embedded the donor's turn-t response.

    May be negative; degradation is signal too.
    """
    if donor == peer:
        raise ValidationError("donor and peer must differ")
    diffs = []
    grouped: dict[int, dict[tuple[int, int], Response]] = {}
    for r in transcript.responses:
        grouped.setdefault(r.trajectory_id, {})[(r.turn, r.agent_id)] = r
    for trajectory, cells in sorted(grouped.items()):
        donor_now = cells.get((turn, donor))
        peer_now = cells.get((turn, peer))
        peer_next = cells.get((turn + 1, peer))
        if donor_now is None or peer_now is None or peer_next is None:
            continue
        if peer_now.correct is None or peer_next.correct is None:
            raise ValidationError(
                f"correctness missing in trajectory {trajectory} around turn {turn}"
            )
        diffs.append(peer_next.correct - peer_now.correct)
    if not diffs:
        raise DebateError(f"no peer continuation for turn {turn}")
    return math.fsum(diffs) / len(diffs)


def epistemic_intrinsic_reward(
    peer_deltas: Sequence[float],
    eta: float,
    n_agents: int,
    turn: int,
    horizon: int,
) -> float:
    """eta / (N - 1) times the summed peer improvements.

    Pays zero at or beyond the training horizon: the final trainable turn
    has no successor inside the optimized window.
    """
    if n_agents < 2:
        raise ValidationError("N >= 2 required")
    if eta < 0.0:
        raise ValidationError("eta must be >= 0")
    if turn < 1 or horizon < 1:
        raise ValidationError("turn and horizon are 1-based")
    if turn >= horizon:
        return 0.0
    if len(peer_deltas) != n_agents - 1:
        raise ValidationError("one improvement value per peer required")
    return eta / (n_agents - 1) * math.fsum(peer_deltas)


def team_rewards(
    records: Sequence[AdvantageRecord],
) -> dict[tuple[int, int], float]:
    """Correctness summed across agents, keyed by (trajectory, turn).

    A reporting convenience only; training consumes the per-agent records.
    """
    if not records:
        raise ValidationError("no records to aggregate")
    totals: dict[tuple[int, int], float] = {}
    for rec in records:
        key = (rec.trajectory_id, rec.turn)
        totals[key] = totals.get(key, 0.0) + rec.reward_correct
    return totals


def grpo_surrogate(
    token_ratios: Sequence[Sequence[float]],
    advantages: Sequence[float],
    kl_per_token: Optional[Sequence[Sequence[float]]] = None,
    clip_eps: float = 0.2,
    kl_beta: float = 0.0,
) -> float:
    """Clipped surrogate objective, averaged response-then-token.

    For each response: token-mean of
    min(ratio * A, clip(ratio, 1-eps, 1+eps) * A) - beta * kl, then the
    mean over responses. Ratios must be positive.
    """
    if len(token_ratios) == 0:
        raise ValidationError("at least one response required")
    if len(token_ratios) != len(advantages):
        raise ValidationError("one advantage per response required")
    if kl_per_token is not None and len(kl_per_token) != len(token_ratios):
        raise ValidationError("one KL sequence per response required")
    if not (0.0 < clip_eps < 1.0):
        raise ValidationError("clip_eps must be in (0, 1)")
    per_response = []
    for idx, ratios in enumerate(token_ratios):
        if len(ratios) == 0:
            raise ValidationError(f"response {idx} has no tokens")
        kls = kl_per_token[idx] if kl_per_token is not None else (0.0,) * len(ratios)
        if len(kls) != len(ratios):
            raise ValidationError(f"response {idx}: KL length mismatch")
        adv = advantages[idx]
        terms = []
        for ratio, kl in zip(ratios, kls):
            if ratio <= 0.0:
                raise ValidationError(f"nonpositive ratio {ratio!r}")
            clipped = min(max(ratio, 1.0 - clip_eps), 1.0 + clip_eps)
            terms.append(min(ratio * adv, clipped * adv) - kl_beta * kl)
        per_response.append(math.fsum(terms) / len(terms))
    return math.fsum(per_response) / len(per_response)


def compute_advantages(
    transcript: Transcript, config: Optional[RewardConfig] = None
) -> tuple[AdvantageRecord, ...]:
    """Full shaping pass over a paired transcript.

    Groups are the K rollouts of one (agent, turn). NLL standardization
    runs within the same group over the responses that actually carry
    logprobs; the rest are exported unweighted and flagged.
    """
    config = config or RewardConfig()
    if transcript.config.rollout_mode != MODE_PAIRED:
        raise ValidationError("advantage pipeline needs a paired-trajectories transcript")
    if not transcript.responses:
        return ()
    n = transcript.config.n_agents
    t_max = transcript.config.n_turns
    horizon = min(config.train_horizon or t_max, t_max)

    by_agent_turn: dict[tuple[int, int], list[Response]] = {}
    for r in transcript.responses:
        by_agent_turn.setdefault((r.agent_id, r.turn), []).append(r)

    records: list[AdvantageRecord] = []
    for turn in range(1, t_max + 1):
        intrinsic: dict[int, float] = {}
        for i in range(n):
            if turn < horizon:
                deltas = [
                    peer_improvement(transcript, donor=i, peer=j, turn=turn)
                    for j in range(n)
                    if j != i
                ]
                intrinsic[i] = epistemic_intrinsic_reward(
                    deltas, config.eta, n, turn, horizon
                )
            else:
                intrinsic[i] = 0.0
        for i in range(n):
            group = sorted(
                by_agent_turn.get((i, turn), ()), key=lambda r: r.trajectory_id
            )
            if not group:
                continue
            totals = []
            for r in group:
                if r.correct is None:
                    raise ValidationError(
                        f"correctness missing at trajectory {r.trajectory_id}, "
                        f"turn {turn}, agent {i}"
                    )
                totals.append(float(r.correct) + intrinsic[i])
            advantages = group_advantage(totals, config.eps_std)

            nll_values: dict[int, float] = {}
            for idx, r in enumerate(group):
                if r.token_logprobs:
                    nll_values[idx] = mean_token_nll(r.token_logprobs)
            standardized: dict[int, float] = {}
            if nll_values:
                keys = sorted(nll_values)
                stds = standardize_nll([nll_values[k] for k in keys], config.eps_std)
                standardized = dict(zip(keys, stds))

            for idx, r in enumerate(group):
                if idx in standardized:
                    u_std = standardized[idx]
                    weight = aleatoric_weight(u_std, config.alpha_au)
                    nll_mean: Optional[float] = nll_values[idx]
                    nll_std: Optional[float] = u_std
                    missing = False
                else:
                    weight = 1.0
                    nll_mean = None
                    nll_std = None
                    missing = True
                records.append(
                    AdvantageRecord(
                        problem_id=transcript.problem_id,
                        agent_id=i,
                        turn=turn,
                        trajectory_id=r.trajectory_id,
                        reward_correct=float(r.correct),
                        reward_intrinsic=intrinsic[i],
                        reward_total=float(r.correct) + intrinsic[i],
                        advantage=advantages[idx],
                        weight=weight,
                        shaped_advantage=weight * advantages[idx],
                        nll_mean=nll_mean,
                        nll_standardized=nll_std,
                        nll_missing=missing,
                    )
                )
    return tuple(records)
