import pytest

from debate_uq.errors import ValidationError
from debate_uq.model import (
    MODE_PAIRED,
    MODE_PROBE,
    AgentSpec,
    DebateConfig,
    Response,
    SamplingParams,
    Transcript,
    order_responses,
    validate_config,
)


class TestConfig:
    def test_defaults(self):
        cfg = DebateConfig(n_agents=2, n_turns=3, n_rollouts=8)
        assert cfg.rollout_mode == MODE_PAIRED
        assert cfg.topology == "fully-connected"
        assert cfg.template_set == "default"

    def test_sampling_defaults(self):
        sp = SamplingParams()
        assert sp.temperature == 0.6
        assert sp.top_p == 0.95
        assert sp.max_tokens == 2048

    @pytest.mark.parametrize(
        "kwargs, message",
        [
            (dict(n_agents=1, n_turns=1, n_rollouts=1), "N >= 2"),
            (dict(n_agents=2, n_turns=0, n_rollouts=1), "T >= 1"),
            (dict(n_agents=2, n_turns=1, n_rollouts=0), "K >= 1"),
            (dict(n_agents=2, n_turns=1, n_rollouts=1, rollout_mode="x"), "rollout mode"),
            (dict(n_agents=2, n_turns=1, n_rollouts=1, topology="ring"), "topology"),
            (dict(n_agents=2, n_turns=1, n_rollouts=1, max_prompt_chars=0), "max_prompt_chars"),
        ],
    )
    def test_rejects_bad_values(self, kwargs, message):
        with pytest.raises(ValidationError, match=message):
            DebateConfig(**kwargs)

    def test_validate_from_mapping(self):
        cfg = validate_config({"n_agents": 3, "n_turns": 2, "n_rollouts": 4})
        assert cfg.n_agents == 3

    def test_validate_rejects_unknown_field(self):
        with pytest.raises(ValidationError, match="unknown"):
            validate_config({"n_agents": 2, "n_turns": 1, "n_rollouts": 1, "bogus": 1})

    def test_probe_mode_accepted(self):
        cfg = validate_config(
            {"n_agents": 2, "n_turns": 1, "n_rollouts": 1, "rollout_mode": MODE_PROBE}
        )
        assert cfg.rollout_mode == MODE_PROBE


class TestResponse:
    def test_turn_must_be_positive(self):
        with pytest.raises(ValidationError):
            Response(agent_id=0, turn=0, trajectory_id=0, text="x")

    def test_logprobs_must_be_nonpositive(self):
        with pytest.raises(ValidationError):
            Response(agent_id=0, turn=1, trajectory_id=0, text="x", token_logprobs=(0.5,))

    def test_correct_is_tristate(self):
        for ok in (None, 0, 1):
            Response(agent_id=0, turn=1, trajectory_id=0, text="x", correct=ok)
        with pytest.raises(ValidationError):
            Response(agent_id=0, turn=1, trajectory_id=0, text="x", correct=2)

    def test_ordering_key(self):
        rs = [
            Response(agent_id=1, turn=1, trajectory_id=0, text="a"),
            Response(agent_id=0, turn=2, trajectory_id=0, text="b"),
            Response(agent_id=0, turn=1, trajectory_id=0, text="c"),
            Response(agent_id=0, turn=1, trajectory_id=1, text="d"),
        ]
        ordered = order_responses(rs)
        assert [r.text for r in ordered] == ["c", "a", "b", "d"]


class TestTranscript:
    def test_paired_cells_must_be_complete(self, arith_problem):
        cfg = DebateConfig(n_agents=2, n_turns=1, n_rollouts=1)
        specs = (
            AgentSpec(agent_id=0, kind="mock-bayesian", sampling=SamplingParams()),
            AgentSpec(agent_id=1, kind="mock-bayesian", sampling=SamplingParams()),
        )
        only_one = (Response(agent_id=0, turn=1, trajectory_id=0, text="x"),)
        with pytest.raises(ValidationError):
            Transcript(
                problem_id=arith_problem.problem_id,
                config=cfg,
                agents=specs,
                responses=only_one,
            )

    def test_cell_and_at_turn(self, paired_transcript):
        cell = paired_transcript.cell(trajectory_id=0, turn=1)
        assert [r.agent_id for r in cell] == [0, 1]
        turn1 = paired_transcript.at_turn(1)
        assert len(turn1) == 2 * paired_transcript.config.n_rollouts
        assert all(r.turn == 1 for r in turn1)

    def test_probe_accessor(self, probe_transcript):
        probes = probe_transcript.at_turn(2, probes=True)
        assert len(probes) == 2 * probe_transcript.config.n_rollouts
        assert all(r.turn == 2 for r in probes)

    def test_responses_sorted_on_construction(self, paired_transcript):
        keys = [(r.trajectory_id, r.turn, r.agent_id) for r in paired_transcript.responses]
        assert keys == sorted(keys)
