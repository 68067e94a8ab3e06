"""Debate orchestration.

Two rollout modes share the same context building, verification, and
uncertainty accounting:

paired trajectories
    Turn 1 draws K independent responses per agent; thread k at turn t > 1
    continues from thread k's turn t-1 responses only. Per-turn answer
    distributions are the across-thread frequencies.

per-turn probe
    One main trajectory. Each turn every agent first draws K probe samples
    (measurement only), then a single continuation response extends the
    debate. Distributions come from the probes.

Randomness is fully determined by (seed, problem, purpose, trajectory,
agent, turn), so transcripts are reproducible regardless of execution
order or worker count.
"""

from __future__ import annotations

import hashlib
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .agents import Agent
from .answers import (
    UNPARSEABLE,
    CanonicalAnswer,
    answers_equivalent,
    extract_final_answer,
    normalize_answer,
)
from .errors import (
    AgentCallError,
    AnswerError,
    DebateAbortError,
    PromptOverflowError,
    ValidationError,
)
from .model import (
    MODE_PAIRED,
    MODE_PROBE,
    DebateConfig,
    Problem,
    Response,
    Transcript,
    validate_config,
)
from .templates import TemplateSet, get_template_set, render_debate, render_opening
from .uncertainty import (
    UncertaintyReport,
    decompose,
    estimate_distribution,
    union_support,
)

log = logging.getLogger(__name__)

MAX_ATTEMPTS = 3

_PURPOSE_CODES = {"respond": 0, "probe": 1, "continue": 2}


@dataclass(frozen=True)
class ContextBundle:
    """Everything an agent needs to produce its turn."""

    problem: Problem
    turn: int
    peer_responses: tuple[Response, ...]
    template_id: str
    system_prompt: str
    rendered_prompt: str


def build_context(
    problem: Problem,
    peer_responses: Sequence[Response],
    turn: int,
    template_set: "TemplateSet | str" = "default",
    max_prompt_chars: int = 20480,
) -> ContextBundle:
    """Render the prompt for one turn.

    Turn 1 takes no peers; later turns require the full prior-turn round,
    embedded verbatim in agent-index order. Overlong prompts raise rather
    than truncate.
    """
    ts = (
        get_template_set(template_set)
        if isinstance(template_set, str)
        else template_set
    )
    if turn < 1:
        raise ValidationError("turn is 1-based")
    if turn == 1:
        if peer_responses:
            raise ValidationError("turn 1 takes no peer responses")
        rendered = render_opening(ts, problem.question)
    else:
        if not peer_responses:
            raise ValidationError("debate turns need the prior round of responses")
        peers = sorted(peer_responses, key=lambda r: r.agent_id)
        rendered = render_debate(ts, problem.question, [r.text for r in peers])
        peer_responses = peers
    if len(rendered) > max_prompt_chars:
        raise PromptOverflowError(
            f"prompt overflow: {len(rendered)} chars exceeds {max_prompt_chars}"
        )
    return ContextBundle(
        problem=problem,
        turn=turn,
        peer_responses=tuple(peer_responses),
        template_id=ts.template_id,
        system_prompt=ts.system,
        rendered_prompt=rendered,
    )


def derive_rng(
    seed: int, problem_id: str, purpose: str, trajectory: int, agent: int, turn: int
) -> np.random.Generator:
    """Independent stream per (problem, purpose, trajectory, agent, turn)."""
    pid = int.from_bytes(hashlib.sha256(problem_id.encode("utf-8")).digest()[:8], "big")
    ss = np.random.SeedSequence(
        [int(seed) % (2**63), pid, _PURPOSE_CODES[purpose], trajectory, agent, turn]
    )
    return np.random.default_rng(ss)


def _failure_response(agent_id: int, turn: int, trajectory_id: int) -> Response:
    return Response(
        agent_id=agent_id,
        turn=turn,
        trajectory_id=trajectory_id,
        text="",
        extracted_answer=None,
        correct=0,
    )


def _verify(response: Response, truth: CanonicalAnswer) -> Response:
    raw = extract_final_answer(response.text)
    canon = None
    if raw is not None:
        try:
            canon = normalize_answer(raw)
        except AnswerError:
            canon = None
    extracted = canon.normalized if canon is not None else None
    correct = 1 if canon is not None and answers_equivalent(canon, truth) else 0
    return replace(response, extracted_answer=extracted, correct=correct)


def _call_with_retry(
    agent: Agent,
    invoke: Callable[[], Response],
    *,
    backoff_base: float,
    where: str,
) -> Optional[Response]:
    """Run one agent call under the retry policy.

    Remote-style agents get up to MAX_ATTEMPTS tries with exponential
    backoff; deterministic agents fail immediately. Returns None when the
    call could not be completed.
    """
    attempts = MAX_ATTEMPTS if agent.retryable else 1
    for attempt in range(1, attempts + 1):
        try:
            return invoke()
        except AgentCallError as exc:
            log.warning("agent call failed at %s (attempt %d/%d): %s", where, attempt, attempts, exc)
            if attempt < attempts:
                time.sleep(backoff_base * (2 ** (attempt - 1)))
    return None


def _answer_key(response: Response) -> str:
    return response.extracted_answer if response.extracted_answer is not None else UNPARSEABLE


def _turn_report(turn: int, keys_by_agent: Sequence[Sequence[str]]) -> UncertaintyReport:
    support = union_support(keys_by_agent)
    dists = [estimate_distribution(keys, support) for keys in keys_by_agent]
    return decompose(dists, turn=turn)


def _run_cells(
    tasks: list[tuple[int, int, Callable[[], Optional[Response]]]],
    max_workers: int,
) -> dict[tuple[int, int], Optional[Response]]:
    """Execute (trajectory, agent) -> call tasks, optionally in threads."""
    results: dict[tuple[int, int], Optional[Response]] = {}
    if max_workers <= 1:
        for trajectory, agent_id, call in tasks:
            results[(trajectory, agent_id)] = call()
        return results
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = {
            (trajectory, agent_id): pool.submit(call)
            for trajectory, agent_id, call in tasks
        }
    for key, future in futures.items():
        results[key] = future.result()
    return results


def run_debate_paired(
    problem: Problem,
    agents: Sequence[Agent],
    config: DebateConfig,
    *,
    seed: int = 0,
    max_workers: int = 1,
    backoff_base: float = 0.5,
) -> Transcript:
    """Run K paired debate threads and report per-turn uncertainty."""
    config = validate_config(config)
    if config.rollout_mode != MODE_PAIRED:
        raise ValidationError("config rollout_mode must be paired-trajectories")
    _check_agents(agents, config)
    truth = normalize_answer(problem.ground_truth)
    template = get_template_set(config.template_set)
    n, t_max, k_max = config.n_agents, config.n_turns, config.n_rollouts

    states: list[list[Agent]] = [list(agents) for _ in range(k_max)]
    responses: list[Response] = []
    by_cell: dict[tuple[int, int], list[Response]] = {}
    reports: list[UncertaintyReport] = []

    for turn in range(1, t_max + 1):
        tasks: list[tuple[int, int, Callable[[], Optional[Response]]]] = []
        for k in range(k_max):
            try:
                if turn == 1:
                    context = build_context(
                        problem, (), 1, template, config.max_prompt_chars
                    )
                else:
                    prev = by_cell[(k, turn - 1)]
                    keys = [
                        r.extracted_answer for r in sorted(prev, key=lambda r: r.agent_id)
                    ]
                    states[k] = [agent.observe(keys) for agent in states[k]]
                    context = build_context(
                        problem, prev, turn, template, config.max_prompt_chars
                    )
            except PromptOverflowError as exc:
                log.warning("trajectory %d turn %d skipped: %s", k, turn, exc)
                for i in range(n):
                    tasks.append((k, i, _constant(None)))
                continue
            for i in range(n):
                tasks.append((k, i, _respond_task(states[k][i], context, turn, k, seed, problem, backoff_base)))

        results = _run_cells(tasks, max_workers)
        turn_responses: list[Response] = []
        failures = 0
        for (k, i), result in sorted(results.items()):
            if result is None:
                failures += 1
                final = _failure_response(i, turn, k)
            else:
                final = _verify(result, truth)
            turn_responses.append(final)
            by_cell.setdefault((k, turn), []).append(final)
        if failures == n * k_max:
            raise DebateAbortError(f"every thread failed at turn {turn}")
        responses.extend(turn_responses)

        keys_by_agent = [
            [_answer_key(r) for r in turn_responses if r.agent_id == i]
            for i in range(n)
        ]
        reports.append(_turn_report(turn, keys_by_agent))

    return Transcript(
        problem_id=problem.problem_id,
        config=config,
        question=problem.question,
        ground_truth=problem.ground_truth,
        agents=tuple(a.spec for a in agents),
        responses=tuple(responses),
        reports=tuple(reports),
    )


def run_debate_probe(
    problem: Problem,
    agents: Sequence[Agent],
    config: DebateConfig,
    *,
    seed: int = 0,
    max_workers: int = 1,
    backoff_base: float = 0.5,
) -> Transcript:
    """Run one main trajectory, probing K samples per agent each turn.

    Probes only feed the distribution estimates; the continuation response
    (sampled by default, greedy when configured) is what the next turn's
    context embeds.
    """
    config = validate_config(config)
    if config.rollout_mode != MODE_PROBE:
        raise ValidationError("config rollout_mode must be per-turn-probe")
    _check_agents(agents, config)
    truth = normalize_answer(problem.ground_truth)
    template = get_template_set(config.template_set)
    n, t_max, k_max = config.n_agents, config.n_turns, config.n_rollouts

    states: list[Agent] = list(agents)
    main: list[Response] = []
    probes: list[Response] = []
    reports: list[UncertaintyReport] = []
    prev_round: list[Response] = []

    for turn in range(1, t_max + 1):
        if turn == 1:
            context = build_context(problem, (), 1, template, config.max_prompt_chars)
        else:
            keys = [
                r.extracted_answer
                for r in sorted(prev_round, key=lambda r: r.agent_id)
            ]
            states = [agent.observe(keys) for agent in states]
            context = build_context(
                problem, prev_round, turn, template, config.max_prompt_chars
            )

        keys_by_agent: list[list[str]] = []
        for i in range(n):
            agent = states[i]
            if agent.retryable:
                # Remote probes retry sample by sample so one flaky call
                # does not void the whole measurement batch.
                verified = []
                for k in range(k_max):
                    call = _respond_task(
                        agent, context, turn, k, seed, problem, backoff_base,
                        purpose="probe",
                    )
                    result = call()
                    verified.append(
                        _verify(result, truth)
                        if result is not None
                        else _failure_response(i, turn, k)
                    )
            else:
                rng = derive_rng(seed, problem.problem_id, "probe", 0, i, turn)
                try:
                    batch = agent.respond_many(context, turn=turn, count=k_max, rng=rng)
                except AgentCallError as exc:
                    log.warning(
                        "probe batch failed for agent %d turn %d: %s", i, turn, exc
                    )
                    batch = []
                verified = [_verify(r, truth) for r in batch]
                verified.extend(
                    _failure_response(i, turn, k)
                    for k in range(len(verified), k_max)
                )
            probes.extend(verified)
            keys_by_agent.append([_answer_key(r) for r in verified])
        reports.append(_turn_report(turn, keys_by_agent))

        round_responses: list[Response] = []
        failures = 0
        for i in range(n):
            call = _respond_task(
                states[i],
                context,
                turn,
                0,
                seed,
                problem,
                backoff_base,
                purpose="continue",
                greedy=config.greedy_continuation,
            )
            result = call()
            if result is None:
                failures += 1
                final = _failure_response(i, turn, 0)
            else:
                final = _verify(result, truth)
            round_responses.append(final)
        if failures == n:
            raise DebateAbortError(f"every continuation failed at turn {turn}")
        main.extend(round_responses)
        prev_round = round_responses

    return Transcript(
        problem_id=problem.problem_id,
        config=config,
        question=problem.question,
        ground_truth=problem.ground_truth,
        agents=tuple(a.spec for a in agents),
        responses=tuple(main),
        probes=tuple(probes),
        reports=tuple(reports),
    )


def recompute_reports(transcript: Transcript) -> tuple[UncertaintyReport, ...]:
    """Rebuild per-turn reports from a stored transcript.

    Uses probe records when present (probe mode), the paired threads
    otherwise. Replaying a transcript through this function must reproduce
    the reports computed live.
    """
    n = transcript.config.n_agents
    use_probes = bool(transcript.probes)
    turns = sorted(
        {r.turn for r in (transcript.probes if use_probes else transcript.responses)}
    )
    reports = []
    for turn in turns:
        population = transcript.at_turn(turn, probes=use_probes)
        keys_by_agent = [
            [_answer_key(r) for r in population if r.agent_id == i] for i in range(n)
        ]
        reports.append(_turn_report(turn, keys_by_agent))
    return tuple(reports)


def _check_agents(agents: Sequence[Agent], config: DebateConfig) -> None:
    if len(agents) != config.n_agents:
        raise ValidationError(
            f"{len(agents)} agents supplied for n_agents={config.n_agents}"
        )
    ids = [a.spec.agent_id for a in agents]
    if ids != list(range(config.n_agents)):
        raise ValidationError("agents must be ordered with ids 0..N-1")


def _respond_task(
    agent: Agent,
    context: ContextBundle,
    turn: int,
    trajectory: int,
    seed: int,
    problem: Problem,
    backoff_base: float,
    purpose: str = "respond",
    greedy: bool = False,
) -> Callable[[], Optional[Response]]:
    agent_id = agent.spec.agent_id

    def call() -> Optional[Response]:
        rng = derive_rng(seed, problem.problem_id, purpose, trajectory, agent_id, turn)
        return _call_with_retry(
            agent,
            lambda: agent.respond(
                context, turn=turn, trajectory_id=trajectory, rng=rng, greedy=greedy
            ),
            backoff_base=backoff_base,
            where=f"trajectory={trajectory} agent={agent_id} turn={turn}",
        )

    return call


def _constant(value: Optional[Response]) -> Callable[[], Optional[Response]]:
    return lambda: value
