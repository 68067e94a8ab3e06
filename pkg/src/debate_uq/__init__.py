"""Debate orchestration with per-turn uncertainty accounting.

The package runs iterative debates among pluggable agents, splits each
turn's predictive uncertainty into epistemic and aleatoric parts, checks
the underlying Bayesian identities numerically on small discrete worlds,
and turns transcripts into uncertainty-weighted advantage batches for
external trainers.
"""

from .answers import (
    UNPARSEABLE,
    CanonicalAnswer,
    answers_equivalent,
    canonical_key,
    correctness,
    extract_final_answer,
    normalize_answer,
)
from .beliefs import (
    BeliefWorld,
    Channel,
    HeterogeneousGainCheck,
    LogOddsCheck,
    binary_correctness_world,
    check_heterogeneous_gain,
    check_log_odds_update,
    conditional_gain,
    consensus_world,
    epistemic_gain,
    pair_gain,
    posterior_update,
    random_belief_world,
    tilted_prior,
)
from .config import ExperimentConfig, apply_overrides, load_experiment_config
from .engine import (
    build_context,
    derive_rng,
    recompute_reports,
    run_debate_paired,
    run_debate_probe,
)
from .errors import (
    AgentCallError,
    AnswerError,
    BudgetExceededError,
    DebateAbortError,
    DebateError,
    DegenerateOddsError,
    InconsistentEvidenceError,
    MalformedReplyError,
    MissingLogprobsError,
    PromptOverflowError,
    RateLimitError,
    ReplayMissError,
    StorageError,
    TransportError,
    ValidationError,
)
from .agents import (
    Agent,
    MockBayesianAgent,
    RemoteAgent,
    ReplayAgent,
    make_agent,
    make_mock_agent,
)
from .model import (
    AgentSpec,
    DebateConfig,
    Problem,
    Response,
    SamplingParams,
    Transcript,
    validate_config,
)
from .rewards import (
    AdvantageRecord,
    RewardConfig,
    aleatoric_weight,
    compute_advantages,
    correctness_reward,
    epistemic_intrinsic_reward,
    group_advantage,
    grpo_surrogate,
    mean_token_nll,
    peer_improvement,
    shaped_advantage,
    standardize_nll,
    team_rewards,
)
from .storage import (
    export_metrics,
    export_training_batch,
    load_dataset,
    load_training_batch,
    load_transcript,
    save_transcript,
)
from .uncertainty import (
    AnswerDistribution,
    FlipStats,
    UncertaintyReport,
    decompose,
    entropy,
    estimate_distribution,
    flip_transitions,
    generalized_jsd,
    log_bayes_factor,
    log_bayes_factor_clamped,
    mixture,
    nats_to_bits,
    union_support,
)

__version__ = "0.1.0"

__all__ = [
    "Agent",
    "AgentCallError",
    "AgentSpec",
    "AdvantageRecord",
    "AnswerDistribution",
    "AnswerError",
    "BeliefWorld",
    "BudgetExceededError",
    "CanonicalAnswer",
    "Channel",
    "DebateAbortError",
    "DebateConfig",
    "DebateError",
    "DegenerateOddsError",
    "ExperimentConfig",
    "FlipStats",
    "HeterogeneousGainCheck",
    "InconsistentEvidenceError",
    "LogOddsCheck",
    "MalformedReplyError",
    "MissingLogprobsError",
    "MockBayesianAgent",
    "Problem",
    "PromptOverflowError",
    "RateLimitError",
    "RemoteAgent",
    "ReplayAgent",
    "ReplayMissError",
    "Response",
    "RewardConfig",
    "SamplingParams",
    "StorageError",
    "Transcript",
    "TransportError",
    "UNPARSEABLE",
    "UncertaintyReport",
    "ValidationError",
    "aleatoric_weight",
    "answers_equivalent",
    "apply_overrides",
    "binary_correctness_world",
    "build_context",
    "canonical_key",
    "check_heterogeneous_gain",
    "check_log_odds_update",
    "compute_advantages",
    "conditional_gain",
    "consensus_world",
    "correctness",
    "correctness_reward",
    "decompose",
    "derive_rng",
    "entropy",
    "epistemic_gain",
    "epistemic_intrinsic_reward",
    "estimate_distribution",
    "export_metrics",
    "export_training_batch",
    "extract_final_answer",
    "flip_transitions",
    "generalized_jsd",
    "group_advantage",
    "grpo_surrogate",
    "load_dataset",
    "load_experiment_config",
    "load_training_batch",
    "load_transcript",
    "log_bayes_factor",
    "log_bayes_factor_clamped",
    "make_agent",
    "make_mock_agent",
    "mean_token_nll",
    "mixture",
    "nats_to_bits",
    "normalize_answer",
    "pair_gain",
    "peer_improvement",
    "posterior_update",
    "random_belief_world",
    "recompute_reports",
    "run_debate_paired",
    "run_debate_probe",
    "save_transcript",
    "shaped_advantage",
    "standardize_nll",
    "team_rewards",
    "tilted_prior",
    "union_support",
    "validate_config",
]
