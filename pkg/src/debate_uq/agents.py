"""Debate participants: mock Bayesian, replay, and remote-endpoint agents.

Agents are immutable. Belief updates return a new agent, so the engine can
keep one evolving copy per trajectory thread without aliasing surprises.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import TYPE_CHECKING, Optional, Sequence

import httpx
import numpy as np

from .answers import normalize_answer
from .beliefs import BeliefWorld, consensus_world, posterior_update, tilted_prior
from .errors import (
    AnswerError,
    MalformedReplyError,
    RateLimitError,
    ReplayMissError,
    TransportError,
    ValidationError,
)
from .model import (
    KIND_MOCK,
    KIND_REMOTE,
    KIND_REPLAY,
    AgentSpec,
    Problem,
    Response,
    Transcript,
)

if TYPE_CHECKING:  # pragma: no cover
    from .engine import ContextBundle

ENV_BASE_URL = "DEBATE_UQ_BASE_URL"
ENV_API_KEY = "DEBATE_UQ_API_KEY"

_MOCK_TEXT = "After weighing the evidence I settle on \\boxed{{{answer}}}."


class Agent:
    """Minimal duck-typed participant interface."""

    spec: AgentSpec
    retryable = False

    def observe(self, peer_answers: Sequence[Optional[str]]) -> "Agent":
        """Fold the peers' asserted answers into internal state. Default: none."""
        return self

    def respond(
        self,
        context: "ContextBundle",
        *,
        turn: int,
        trajectory_id: int,
        rng: np.random.Generator,
        greedy: bool = False,
    ) -> Response:
        raise NotImplementedError

    def respond_many(
        self,
        context: "ContextBundle",
        *,
        turn: int,
        count: int,
        rng: np.random.Generator,
    ) -> list[Response]:
        """Draw ``count`` independent responses (probe sampling)."""
        return [
            self.respond(context, turn=turn, trajectory_id=k, rng=rng)
            for k in range(count)
        ]


@dataclass(frozen=True)
class MockBayesianAgent(Agent):
    """Exactly solvable debater over a finite belief world.

    The posterior starts at the world prior (or an explicit override) and
    is updated on observed peer answers through the named channel.
    Conformity in [0, 1] blends the channel likelihood toward the emission
    column of the asserted answer, i.e. toward the hypotheses that would
    themselves produce that answer. emission_noise replaces the sampled
    answer with a uniformly random wrong one at that rate; a per-turn
    ``noise_schedule`` overrides it when present.
    """

    spec: AgentSpec
    world: BeliefWorld
    posterior: tuple[float, ...] = ()
    conformity: float = 0.0
    emission_noise: float = 0.0
    noise_schedule: Optional[tuple[float, ...]] = None
    channel: str = "peer"
    retryable = False

    def __post_init__(self) -> None:
        if not (0.0 <= self.conformity <= 1.0):
            raise ValidationError("conformity must be in [0, 1]")
        if not (0.0 <= self.emission_noise <= 1.0):
            raise ValidationError("emission_noise must be in [0, 1]")
        if self.noise_schedule is not None:
            for v in self.noise_schedule:
                if not (0.0 <= v <= 1.0):
                    raise ValidationError("noise_schedule entries must be in [0, 1]")
        if not self.posterior:
            object.__setattr__(self, "posterior", tuple(self.world.prior))
        if len(self.posterior) != self.world.n_hypotheses:
            raise ValidationError("posterior length must match hypothesis count")
        if self.conformity > 0.0:
            ch = self.world.channel(self.channel)
            if ch.symbols != self.world.answers:
                raise ValidationError(
                    "conformity weighting needs the peer channel alphabet to "
                    "equal the answer alphabet"
                )

    def noise_for_turn(self, turn: int) -> float:
        if self.noise_schedule:
            return self.noise_schedule[min(turn - 1, len(self.noise_schedule) - 1)]
        return self.emission_noise

    def observe(self, peer_answers: Sequence[Optional[str]]) -> "MockBayesianAgent":
        ch = self.world.channel(self.channel)
        emission = self.world.emission_matrix()
        columns = []
        for answer in peer_answers:
            if answer is None or answer not in ch.symbols:
                continue  # unparseable or out-of-alphabet: carries no evidence
            col = ch.column(answer)
            if self.conformity > 0.0:
                j = self.world.answers.index(answer)
                col = (1.0 - self.conformity) * col + self.conformity * emission[:, j]
            columns.append(col)
        if not columns:
            return self
        new_posterior = posterior_update(self.posterior, columns)
        return replace(self, posterior=new_posterior)

    def answer_probabilities(self, turn: int) -> np.ndarray:
        """Exact predictive answer distribution at a turn (noise applied)."""
        return self.world.predictive(self.posterior, self.noise_for_turn(turn))

    def respond(
        self,
        context: "ContextBundle",
        *,
        turn: int,
        trajectory_id: int,
        rng: np.random.Generator,
        greedy: bool = False,
    ) -> Response:
        probs = self.answer_probabilities(turn)
        if greedy:
            idx = int(np.argmax(probs))
        else:
            idx = int(rng.choice(len(probs), p=probs))
        return self._render(idx, probs, turn, trajectory_id)

    def respond_many(
        self,
        context: "ContextBundle",
        *,
        turn: int,
        count: int,
        rng: np.random.Generator,
    ) -> list[Response]:
        probs = self.answer_probabilities(turn)
        draws = rng.choice(len(probs), size=count, p=probs)
        return [
            self._render(int(idx), probs, turn, k) for k, idx in enumerate(draws)
        ]

    def _render(
        self, idx: int, probs: np.ndarray, turn: int, trajectory_id: int
    ) -> Response:
        answer = self.world.answers[idx]
        text = _MOCK_TEXT.format(answer=answer)
        # Flat synthetic token profile: the mean NLL equals the negative log
        # predictive probability of the emitted answer.
        logprob = min(math.log(float(probs[idx])), 0.0)
        n_tokens = len(text.split())
        return Response(
            agent_id=self.spec.agent_id,
            turn=turn,
            trajectory_id=trajectory_id,
            text=text,
            token_logprobs=(logprob,) * n_tokens,
        )


class ReplayAgent(Agent):
    """Replays responses stored in a transcript, cell by cell."""

    retryable = False

    def __init__(self, spec: AgentSpec, source: Transcript):
        self.spec = spec
        self._main = {
            (r.trajectory_id, r.turn, r.agent_id): r for r in source.responses
        }
        self._probes = {
            (r.trajectory_id, r.turn, r.agent_id): r for r in source.probes
        }

    def respond(
        self,
        context: "ContextBundle",
        *,
        turn: int,
        trajectory_id: int,
        rng: np.random.Generator,
        greedy: bool = False,
    ) -> Response:
        key = (trajectory_id, turn, self.spec.agent_id)
        stored = self._main.get(key)
        if stored is None:
            raise ReplayMissError(
                f"replay miss at trajectory={trajectory_id}, turn={turn}, "
                f"agent={self.spec.agent_id}"
            )
        return stored

    def respond_many(
        self,
        context: "ContextBundle",
        *,
        turn: int,
        count: int,
        rng: np.random.Generator,
    ) -> list[Response]:
        out = []
        for k in range(count):
            stored = self._probes.get((k, turn, self.spec.agent_id))
            if stored is None:
                raise ReplayMissError(
                    f"replay miss at probe={k}, turn={turn}, agent={self.spec.agent_id}"
                )
            out.append(stored)
        return out


class RemoteAgent(Agent):
    """Chat-completions client for an OpenAI-style HTTP endpoint.

    The base URL and API key come from the environment (or constructor
    overrides) and are never serialized anywhere. Token logprobs are
    requested; when the endpoint does not return them the response simply
    carries none and downstream consumers fail loudly on use.
    """

    retryable = True

    def __init__(
        self,
        spec: AgentSpec,
        *,
        base_url: Optional[str] = None,
        api_key: Optional[str] = None,
        client: Optional[httpx.Client] = None,
        timeout: float = 60.0,
    ):
        self.spec = spec
        self.base_url = base_url or str(spec.params.get("base_url", "")) or os.environ.get(
            ENV_BASE_URL, ""
        )
        if not self.base_url:
            raise ValidationError(
                f"remote agent needs a base URL ({ENV_BASE_URL} or spec params)"
            )
        self._api_key = api_key if api_key is not None else os.environ.get(ENV_API_KEY)
        self._client = client or httpx.Client(timeout=timeout)

    def build_payload(self, context: "ContextBundle") -> dict:
        s = self.spec.sampling
        return {
            "model": self.spec.model or "default",
            "messages": [
                {"role": "system", "content": context.system_prompt},
                {"role": "user", "content": context.rendered_prompt},
            ],
            "temperature": s.temperature,
            "top_p": s.top_p,
            "max_tokens": s.max_tokens,
            "logprobs": True,
        }

    def respond(
        self,
        context: "ContextBundle",
        *,
        turn: int,
        trajectory_id: int,
        rng: np.random.Generator,
        greedy: bool = False,
    ) -> Response:
        url = self.base_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        try:
            reply = self._client.post(
                url, json=self.build_payload(context), headers=headers
            )
        except httpx.HTTPError as exc:
            raise TransportError(f"request failed: {exc}") from exc
        if reply.status_code == 429:
            raise RateLimitError("endpoint throttled the request (429)")
        if reply.status_code != 200:
            raise TransportError(f"endpoint returned status {reply.status_code}")
        try:
            body = reply.json()
            choice = body["choices"][0]
            text = choice["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedReplyError(f"unparseable completion payload: {exc}") from exc
        if not isinstance(text, str):
            raise MalformedReplyError("completion content is not text")
        token_logprobs = self._parse_logprobs(choice)
        return Response(
            agent_id=self.spec.agent_id,
            turn=turn,
            trajectory_id=trajectory_id,
            text=text,
            token_logprobs=token_logprobs,
        )

    @staticmethod
    def _parse_logprobs(choice: dict) -> Optional[tuple[float, ...]]:
        info = choice.get("logprobs")
        if not info:
            return None
        content = info.get("content")
        if not content:
            return None
        values = []
        for entry in content:
            lp = entry.get("logprob")
            if not isinstance(lp, (int, float)):
                raise MalformedReplyError("logprob entry is not numeric")
            # Some backends round to slightly positive values; clamp to 0.
            values.append(min(float(lp), 0.0))
        return tuple(values)


def _distractor_answers(ground_truth: str, count: int) -> list[str]:
    """Deterministic wrong answers near the truth when it is numeric."""
    try:
        truth = normalize_answer(ground_truth)
    except AnswerError:
        truth = None
    wrongs: list[str] = []
    if truth is not None and truth.numeric is not None:
        for step in range(1, count + 1):
            wrongs.append(str(truth.numeric + Fraction(step)))
    else:
        for step in range(1, count + 1):
            wrongs.append(f"wrong-{step}")
    return wrongs


def make_mock_agent(spec: AgentSpec, problem: Problem) -> MockBayesianAgent:
    """Instantiate a mock agent whose world is anchored on the problem.

    The answer alphabet is the problem's ground truth plus deterministic
    distractors, so correctness grading against the dataset stays
    meaningful. spec.params controls the world shape:

    - n_answers (default 4), sharpness, peer_flatten
    - conformity, emission_noise, noise_schedule
    - prior_tilt plus favored ("correct", "spread", or an index):
      "spread" tilts agent i toward answer i mod n_answers, which gives
      debates a real initial disagreement to resolve.
    """
    p = dict(spec.params)
    n_answers = int(p.get("n_answers", 4))
    if n_answers < 2:
        raise ValidationError("mock world needs n_answers >= 2")
    truth_key = normalize_answer(problem.ground_truth).normalized
    answers = tuple(sorted({truth_key, *_distractor_answers(truth_key, n_answers - 1)}))
    world = consensus_world(
        answers=answers,
        correct_answer=truth_key,
        sharpness=float(p.get("sharpness", 0.85)),
        peer_flatten=float(p.get("peer_flatten", 0.5)),
    )
    favored = p.get("favored", "spread")
    tilt = float(p.get("prior_tilt", 0.0))
    posterior: tuple[float, ...] = ()
    if tilt > 0.0:
        if favored == "correct":
            favored_idx = world.correct_index
        elif favored == "spread":
            favored_idx = spec.agent_id % len(answers)
        else:
            favored_idx = int(favored)  # type: ignore[arg-type]
        posterior = tilted_prior(len(answers), favored_idx, tilt)
    schedule = p.get("noise_schedule")
    return MockBayesianAgent(
        spec=spec,
        world=world,
        posterior=posterior,
        conformity=float(p.get("conformity", 0.0)),
        emission_noise=float(p.get("emission_noise", 0.0)),
        noise_schedule=tuple(schedule) if schedule else None,
    )


def make_agent(
    spec: AgentSpec,
    problem: Problem,
    *,
    replay_source: Optional[Transcript] = None,
) -> Agent:
    """Build a live agent for one problem from its declarative spec."""
    if spec.kind == KIND_MOCK:
        return make_mock_agent(spec, problem)
    if spec.kind == KIND_REPLAY:
        if replay_source is None:
            raise ValidationError("replay agent needs a source transcript")
        return ReplayAgent(spec, replay_source)
    if spec.kind == KIND_REMOTE:
        return RemoteAgent(spec)
    raise ValidationError(f"unknown agent kind {spec.kind!r}")
