"""Core value objects: problems, agent specs, debate config, responses.

Everything here is an immutable dataclass. Validation happens at
construction so invalid objects cannot circulate; ``validate_config``
additionally accepts a plain mapping (handy when loading config files) and
reports the first violated invariant by name.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

from .errors import ValidationError

KIND_MOCK = "mock-bayesian"
KIND_REPLAY = "replay"
KIND_REMOTE = "remote-endpoint"
AGENT_KINDS = (KIND_MOCK, KIND_REPLAY, KIND_REMOTE)

MODE_PAIRED = "paired-trajectories"
MODE_PROBE = "per-turn-probe"
ROLLOUT_MODES = (MODE_PAIRED, MODE_PROBE)

TOPOLOGY_FULL = "fully-connected"


@dataclass(frozen=True)
class Problem:
    problem_id: str
    question: str
    ground_truth: str

    def __post_init__(self) -> None:
        if not self.problem_id:
            raise ValidationError("problem_id must be non-empty")
        if not self.question:
            raise ValidationError("question must be non-empty")
        if not self.ground_truth:
            raise ValidationError("ground_truth must be non-empty")


@dataclass(frozen=True)
class SamplingParams:
    """Decoding knobs forwarded to the agent backend."""

    temperature: float = 0.6
    top_p: float = 0.95
    max_tokens: int = 2048

    def __post_init__(self) -> None:
        if self.temperature < 0.0:
            raise ValidationError("temperature must be >= 0")
        if not (0.0 < self.top_p <= 1.0):
            raise ValidationError("top_p must be in (0, 1]")
        if self.max_tokens <= 0:
            raise ValidationError("max_tokens must be positive")


@dataclass(frozen=True)
class AgentSpec:
    """Declarative description of one debate participant.

    ``params`` holds kind-specific settings (mock world shape, replay
    source, endpoint model name overrides). Credentials are never part of
    a spec; remote agents read them from the environment at call time.
    """

    agent_id: int
    kind: str
    sampling: SamplingParams = field(default_factory=SamplingParams)
    model: Optional[str] = None
    params: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.agent_id < 0:
            raise ValidationError("agent_id must be >= 0")
        if self.kind not in AGENT_KINDS:
            raise ValidationError(f"unknown agent kind {self.kind!r}")


_CONFIG_FIELDS = (
    "n_agents",
    "n_turns",
    "n_rollouts",
    "rollout_mode",
    "topology",
    "template_set",
    "max_prompt_chars",
    "greedy_continuation",
)


def _check_config(
    n_agents: int,
    n_turns: int,
    n_rollouts: int,
    rollout_mode: str,
    topology: str,
    template_set: str,
    max_prompt_chars: int,
    greedy_continuation: bool,
) -> None:
    """Raise naming the first violated invariant."""
    if n_agents < 2:
        raise ValidationError("N >= 2 required")
    if n_turns < 1:
        raise ValidationError("T >= 1 required")
    if n_rollouts < 1:
        raise ValidationError("K >= 1 required")
    if rollout_mode not in ROLLOUT_MODES:
        raise ValidationError(f"unknown rollout mode {rollout_mode!r}")
    if topology != TOPOLOGY_FULL:
        raise ValidationError(f"unsupported topology {topology!r}")
    if not template_set:
        raise ValidationError("template_set must be non-empty")
    if max_prompt_chars < 1:
        raise ValidationError("max_prompt_chars must be positive")
    if not isinstance(greedy_continuation, bool):
        raise ValidationError("greedy_continuation must be a bool")


@dataclass(frozen=True)
class DebateConfig:
    n_agents: int
    n_turns: int
    n_rollouts: int
    rollout_mode: str = MODE_PAIRED
    topology: str = TOPOLOGY_FULL
    template_set: str = "default"
    max_prompt_chars: int = 20480
    greedy_continuation: bool = False

    def __post_init__(self) -> None:
        _check_config(*(getattr(self, f) for f in _CONFIG_FIELDS))


def validate_config(config: "DebateConfig | Mapping[str, object]") -> DebateConfig:
    """Return a valid DebateConfig or raise naming the broken invariant.

    Accepts an existing config (pass-through after re-checking) or a
    mapping with DebateConfig field names.
    """
    if isinstance(config, DebateConfig):
        _check_config(*(getattr(config, f) for f in _CONFIG_FIELDS))
        return config
    unknown = set(config) - set(_CONFIG_FIELDS)
    if unknown:
        raise ValidationError(f"unknown config fields: {sorted(unknown)}")
    return DebateConfig(**dict(config))  # type: ignore[arg-type]


@dataclass(frozen=True)
class Response:
    """One agent utterance at a (trajectory, turn) cell."""

    agent_id: int
    turn: int
    trajectory_id: int
    text: str
    token_logprobs: Optional[tuple[float, ...]] = None
    extracted_answer: Optional[str] = None
    correct: Optional[int] = None

    def __post_init__(self) -> None:
        if self.agent_id < 0:
            raise ValidationError("agent_id must be >= 0")
        if self.turn < 1:
            raise ValidationError("turn is 1-based")
        if self.trajectory_id < 0:
            raise ValidationError("trajectory_id must be >= 0")
        if self.token_logprobs is not None:
            for lp in self.token_logprobs:
                if lp > 0.0:
                    raise ValidationError(f"token logprob {lp!r} above 0")
        if self.correct not in (None, 0, 1):
            raise ValidationError("correct must be 0, 1, or unset")

    def sort_key(self) -> tuple[int, int, int]:
        return (self.trajectory_id, self.turn, self.agent_id)


def order_responses(responses: Sequence[Response]) -> tuple[Response, ...]:
    """Canonical deterministic ordering: (trajectory, turn, agent)."""
    return tuple(sorted(responses, key=Response.sort_key))


@dataclass(frozen=True)
class Transcript:
    """Full record of one debate over one problem.

    ``responses`` carry the debate itself. In probe mode the per-turn
    measurement samples live in ``probes`` (trajectory_id is the probe
    index there) while ``responses`` hold the single main trajectory.
    The problem question and canonical ground truth ride along in the
    header snapshot so prompts and grades can be rebuilt offline.
    """

    problem_id: str
    config: DebateConfig
    question: str = ""
    ground_truth: str = ""
    agents: tuple[AgentSpec, ...] = ()
    responses: tuple[Response, ...] = ()
    probes: tuple[Response, ...] = ()
    reports: tuple = ()

    def __post_init__(self) -> None:
        if not self.problem_id:
            raise ValidationError("problem_id must be non-empty")
        object.__setattr__(self, "responses", order_responses(self.responses))
        object.__setattr__(self, "probes", order_responses(self.probes))
        if self.agents and len(self.agents) != self.config.n_agents:
            raise ValidationError("agent spec count does not match config")
        if self.responses and self.config.rollout_mode == MODE_PAIRED:
            self._check_paired_cells()

    def _check_paired_cells(self) -> None:
        cells: dict[tuple[int, int], int] = {}
        for r in self.responses:
            cells[(r.trajectory_id, r.turn)] = cells.get((r.trajectory_id, r.turn), 0) + 1
        n = self.config.n_agents
        for (trajectory, turn), count in cells.items():
            if count != n:
                raise ValidationError(
                    f"cell (trajectory={trajectory}, turn={turn}) holds {count} responses, expected {n}"
                )

    def cell(self, trajectory_id: int, turn: int) -> tuple[Response, ...]:
        return tuple(
            r
            for r in self.responses
            if r.trajectory_id == trajectory_id and r.turn == turn
        )

    def at_turn(self, turn: int, *, probes: bool = False) -> tuple[Response, ...]:
        source = self.probes if probes else self.responses
        return tuple(r for r in source if r.turn == turn)

    def with_reports(self, reports: Sequence) -> "Transcript":
        return replace(self, reports=tuple(reports))
