"""Experiment configuration: TOML file with environment interpolation.

Secrets stay out of config files by design; `${VAR}` references are
expanded from the environment at load time and endpoint credentials are
read by the remote client directly from the environment when calls are
made.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ValidationError
from .model import AgentSpec, DebateConfig, SamplingParams, validate_config
from .rewards import RewardConfig

_SAMPLING_KEYS = ("temperature", "top_p", "max_tokens")
_AGENT_KEYS = ("kind", "model", *_SAMPLING_KEYS)


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    out_dir: str
    debate: DebateConfig
    agents: tuple[AgentSpec, ...]
    rewards: RewardConfig = field(default_factory=RewardConfig)
    seed: int = 0
    parallel: int = 1
    bits: bool = False

    def __post_init__(self) -> None:
        if self.seed < 0:
            raise ValidationError("seed must be >= 0")
        if self.parallel < 1:
            raise ValidationError("parallel must be >= 1")
        if len(self.agents) != self.debate.n_agents:
            raise ValidationError(
                f"{len(self.agents)} agent tables for n_agents={self.debate.n_agents}"
            )


def _expand(value):
    if isinstance(value, str):
        return os.path.expandvars(value)
    if isinstance(value, dict):
        return {k: _expand(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_expand(v) for v in value]
    return value


def _agent_spec(index: int, table: dict) -> AgentSpec:
    kind = table.get("kind")
    if not kind:
        raise ValidationError(f"agent table {index}: missing kind")
    sampling = SamplingParams(
        **{k: table[k] for k in _SAMPLING_KEYS if k in table}
    )
    params = {k: v for k, v in table.items() if k not in _AGENT_KEYS}
    return AgentSpec(
        agent_id=index,
        kind=str(kind),
        sampling=sampling,
        model=table.get("model"),
        params=params,
    )


def load_experiment_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"config {path}: {exc}") from exc
    raw = _expand(raw)

    debate_table = raw.get("debate")
    if not isinstance(debate_table, dict):
        raise ValidationError("config needs a [debate] table")
    debate = validate_config(debate_table)

    agent_tables = raw.get("agents")
    if not isinstance(agent_tables, list) or not agent_tables:
        raise ValidationError("config needs at least one [[agents]] table")
    agents = tuple(_agent_spec(i, t) for i, t in enumerate(agent_tables))

    rewards_table = raw.get("rewards", {})
    if not isinstance(rewards_table, dict):
        raise ValidationError("[rewards] must be a table")
    rewards = RewardConfig(**rewards_table)

    dataset = raw.get("dataset", "")
    if not dataset:
        raise ValidationError("config needs a dataset path")

    return ExperimentConfig(
        dataset=str(dataset),
        out_dir=str(raw.get("out", "runs/out")),
        debate=debate,
        agents=agents,
        rewards=rewards,
        seed=int(raw.get("seed", 0)),
        parallel=int(raw.get("parallel", 1)),
        bits=bool(raw.get("bits", False)),
    )


def apply_overrides(
    config: ExperimentConfig,
    *,
    dataset: Optional[str] = None,
    out_dir: Optional[str] = None,
    seed: Optional[int] = None,
    parallel: Optional[int] = None,
    bits: Optional[bool] = None,
    n_agents: Optional[int] = None,
    n_turns: Optional[int] = None,
    n_rollouts: Optional[int] = None,
    rollout_mode: Optional[str] = None,
) -> ExperimentConfig:
    """Fold CLI flag overrides into a loaded config."""
    debate_kwargs = {
        "n_agents": n_agents if n_agents is not None else config.debate.n_agents,
        "n_turns": n_turns if n_turns is not None else config.debate.n_turns,
        "n_rollouts": n_rollouts if n_rollouts is not None else config.debate.n_rollouts,
        "rollout_mode": rollout_mode or config.debate.rollout_mode,
        "topology": config.debate.topology,
        "template_set": config.debate.template_set,
        "max_prompt_chars": config.debate.max_prompt_chars,
        "greedy_continuation": config.debate.greedy_continuation,
    }
    debate = validate_config(debate_kwargs)
    agents = config.agents
    if n_agents is not None and n_agents != len(agents):
        if n_agents < len(agents):
            agents = tuple(agents[:n_agents])
        else:
            # Replicate the last agent table for the extra seats.
            last = agents[-1]
            extra = tuple(
                AgentSpec(
                    agent_id=i,
                    kind=last.kind,
                    sampling=last.sampling,
                    model=last.model,
                    params=last.params,
                )
                for i in range(len(agents), n_agents)
            )
            agents = agents + extra
    return ExperimentConfig(
        dataset=dataset or config.dataset,
        out_dir=out_dir or config.out_dir,
        debate=debate,
        agents=agents,
        rewards=config.rewards,
        seed=seed if seed is not None else config.seed,
        parallel=parallel if parallel is not None else config.parallel,
        bits=bits if bits is not None else config.bits,
    )
