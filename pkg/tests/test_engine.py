from dataclasses import dataclass, replace

import pytest

from conftest import mock_specs
from debate_uq.agents import Agent, make_agent
from debate_uq.engine import (
    build_context,
    derive_rng,
    recompute_reports,
    run_debate_paired,
    run_debate_probe,
)
from debate_uq.errors import (
    DebateAbortError,
    PromptOverflowError,
    TransportError,
    ValidationError,
)
from debate_uq.model import (
    MODE_PROBE,
    AgentSpec,
    DebateConfig,
    Problem,
    Response,
    SamplingParams,
)


def fresh_agents(problem, n=2, **params):
    return [make_agent(s, problem) for s in mock_specs(n, **params)]


class TestContext:
    def test_turn_one_has_no_peers(self, arith_problem):
        ctx = build_context(arith_problem, (), 1)
        assert arith_problem.question in ctx.rendered_prompt
        assert ctx.peer_responses == ()
        assert r"\boxed{}" in ctx.rendered_prompt

    def test_turn_one_rejects_peers(self, arith_problem):
        peer = Response(agent_id=0, turn=1, trajectory_id=0, text="x")
        with pytest.raises(ValidationError):
            build_context(arith_problem, [peer], 1)

    def test_debate_turn_requires_peers(self, arith_problem):
        with pytest.raises(ValidationError):
            build_context(arith_problem, (), 2)

    def test_peers_embedded_in_agent_order(self, arith_problem):
        peers = [
            Response(agent_id=1, turn=1, trajectory_id=0, text="SECOND"),
            Response(agent_id=0, turn=1, trajectory_id=0, text="FIRST"),
        ]
        ctx = build_context(arith_problem, peers, 2)
        assert ctx.rendered_prompt.index("FIRST") < ctx.rendered_prompt.index("SECOND")
        assert [r.agent_id for r in ctx.peer_responses] == [0, 1]

    def test_two_agents_say_both(self, arith_problem):
        peers = [
            Response(agent_id=i, turn=1, trajectory_id=0, text=f"t{i}")
            for i in range(2)
        ]
        ctx = build_context(arith_problem, peers, 2)
        assert "We have two answers" in ctx.rendered_prompt
        assert "If both of them are wrong" in ctx.rendered_prompt
        assert " agent 0 response is: t0" in ctx.rendered_prompt

    def test_three_agents_say_all(self, arith_problem):
        peers = [
            Response(agent_id=i, turn=1, trajectory_id=0, text=f"t{i}")
            for i in range(3)
        ]
        ctx = build_context(arith_problem, peers, 2)
        assert "We have three answers" in ctx.rendered_prompt
        assert "If all of them are wrong" in ctx.rendered_prompt
        assert "both" not in ctx.rendered_prompt

    def test_overflow_raises_rather_than_truncates(self, arith_problem):
        with pytest.raises(PromptOverflowError):
            build_context(arith_problem, (), 1, max_prompt_chars=10)

    def test_alternate_template_set(self, arith_problem):
        ctx = build_context(arith_problem, (), 1, template_set="qwen")
        assert "Qwen" in ctx.system_prompt

    def test_unknown_template_set(self, arith_problem):
        with pytest.raises(ValidationError):
            build_context(arith_problem, (), 1, template_set="nope")


class TestRngStreams:
    def test_same_coordinates_same_draws(self):
        a = derive_rng(3, "p1", "respond", 0, 1, 2).random(4)
        b = derive_rng(3, "p1", "respond", 0, 1, 2).random(4)
        assert a.tolist() == b.tolist()

    @pytest.mark.parametrize(
        "coords",
        [
            dict(purpose="probe"),
            dict(trajectory=1),
            dict(agent=0),
            dict(turn=3),
            dict(problem_id="p2"),
            dict(seed=4),
        ],
    )
    def test_any_coordinate_changes_the_stream(self, coords):
        base = dict(seed=3, problem_id="p1", purpose="respond", trajectory=0, agent=1, turn=2)
        a = derive_rng(**base).random(4)
        b = derive_rng(**{**base, **coords}).random(4)
        assert a.tolist() != b.tolist()


class TestPairedDeterminism:
    def test_same_seed_same_transcript(self, arith_problem):
        config = DebateConfig(n_agents=2, n_turns=2, n_rollouts=4)
        t1 = run_debate_paired(arith_problem, fresh_agents(arith_problem), config, seed=5)
        t2 = run_debate_paired(arith_problem, fresh_agents(arith_problem), config, seed=5)
        assert t1.responses == t2.responses
        assert t1.reports == t2.reports

    def test_different_seed_differs(self, arith_problem):
        config = DebateConfig(n_agents=2, n_turns=2, n_rollouts=8)
        t1 = run_debate_paired(arith_problem, fresh_agents(arith_problem), config, seed=5)
        t2 = run_debate_paired(arith_problem, fresh_agents(arith_problem), config, seed=6)
        assert t1.responses != t2.responses

    def test_worker_count_does_not_change_bytes(self, arith_problem):
        config = DebateConfig(n_agents=2, n_turns=3, n_rollouts=4)
        serial = run_debate_paired(
            arith_problem, fresh_agents(arith_problem), config, seed=9, max_workers=1
        )
        threaded = run_debate_paired(
            arith_problem, fresh_agents(arith_problem), config, seed=9, max_workers=4
        )
        assert serial.responses == threaded.responses
        assert serial.reports == threaded.reports

    def test_turn_one_varies_across_trajectories(self, paired_transcript):
        texts = {r.text for r in paired_transcript.at_turn(1)}
        assert len(texts) > 1

    def test_every_response_graded(self, paired_transcript):
        assert all(r.correct in (0, 1) for r in paired_transcript.responses)

    def test_reports_match_recomputation(self, paired_transcript):
        assert recompute_reports(paired_transcript) == paired_transcript.reports


@dataclass(frozen=True)
class TamperAgent(Agent):
    """Delegates to a mock but rewrites its turn-1 reply in one thread."""

    spec: AgentSpec
    inner: Agent
    trajectory: int

    def observe(self, peer_answers):
        return TamperAgent(self.spec, self.inner.observe(peer_answers), self.trajectory)

    def respond(self, context, *, turn, trajectory_id, rng, greedy=False):
        out = self.inner.respond(
            context, turn=turn, trajectory_id=trajectory_id, rng=rng, greedy=greedy
        )
        if turn == 1 and trajectory_id == self.trajectory:
            return replace(out, text=r"Actually I claim \boxed{999}.")
        return out


class TestThreadIsolation:
    def test_tampering_one_thread_leaves_others_untouched(self, arith_problem):
        config = DebateConfig(n_agents=2, n_turns=2, n_rollouts=4)
        baseline = run_debate_paired(
            arith_problem, fresh_agents(arith_problem), config, seed=5
        )
        agents = fresh_agents(arith_problem)
        agents[1] = TamperAgent(agents[1].spec, agents[1], trajectory=0)
        tampered = run_debate_paired(arith_problem, agents, config, seed=5)

        assert tampered.cell(0, 1)[1].extracted_answer == "999"
        for k in range(1, config.n_rollouts):
            for turn in (1, 2):
                assert tampered.cell(k, turn) == baseline.cell(k, turn)


@dataclass(frozen=True)
class FlakyAgent(Agent):
    """Remote-like agent that fails a scripted number of times per call."""

    spec: AgentSpec
    inner: Agent
    failures_before_success: int
    calls: list
    retryable = True

    def observe(self, peer_answers):
        return FlakyAgent(
            self.spec,
            self.inner.observe(peer_answers),
            self.failures_before_success,
            self.calls,
        )

    def respond(self, context, *, turn, trajectory_id, rng, greedy=False):
        site = (trajectory_id, turn)
        seen = sum(1 for s in self.calls if s == site)
        self.calls.append(site)
        if seen < self.failures_before_success:
            raise TransportError("synthetic outage")
        return self.inner.respond(
            context, turn=turn, trajectory_id=trajectory_id, rng=rng, greedy=greedy
        )


class TestFailureHandling:
    def config(self, turns=1, rollouts=2):
        return DebateConfig(n_agents=2, n_turns=turns, n_rollouts=rollouts)

    def test_transient_failures_are_retried(self, arith_problem):
        agents = fresh_agents(arith_problem)
        flaky = FlakyAgent(agents[1].spec, agents[1], 2, [])
        agents[1] = flaky
        t = run_debate_paired(
            arith_problem, agents, self.config(), seed=1, backoff_base=0.0
        )
        # 2 failures then success, per trajectory
        assert len(flaky.calls) == 6
        assert all(r.text for r in t.responses if r.agent_id == 1)

    def test_exhausted_retries_leave_a_placeholder(self, arith_problem):
        agents = fresh_agents(arith_problem)
        flaky = FlakyAgent(agents[1].spec, agents[1], 99, [])
        agents[1] = flaky
        t = run_debate_paired(
            arith_problem, agents, self.config(), seed=1, backoff_base=0.0
        )
        assert len(flaky.calls) == 6  # 3 attempts x 2 trajectories
        placeholders = [r for r in t.responses if r.agent_id == 1]
        assert all(r.text == "" and r.correct == 0 for r in placeholders)
        # the other agent's answers still got graded normally
        assert any(r.text for r in t.responses if r.agent_id == 0)

    def test_deterministic_agents_fail_fast(self, arith_problem):
        agents = fresh_agents(arith_problem)
        flaky = FlakyAgent(agents[1].spec, agents[1], 99, [])
        object.__setattr__(flaky, "retryable", False)
        agents[1] = flaky
        run_debate_paired(arith_problem, agents, self.config(), seed=1, backoff_base=0.0)
        assert len(flaky.calls) == 2  # one attempt per trajectory, no retries

    def test_total_failure_aborts(self, arith_problem):
        agents = fresh_agents(arith_problem)
        agents = [FlakyAgent(a.spec, a, 99, []) for a in agents]
        with pytest.raises(DebateAbortError):
            run_debate_paired(
                arith_problem, agents, self.config(), seed=1, backoff_base=0.0
            )

    def test_overflow_skips_instead_of_truncating(self, arith_problem):
        config = DebateConfig(
            n_agents=2, n_turns=2, n_rollouts=2, max_prompt_chars=120
        )
        # turn 1 fits in 120 chars, every turn-2 debate prompt cannot
        with pytest.raises(DebateAbortError):
            run_debate_paired(
                arith_problem, fresh_agents(arith_problem), config, seed=1
            )

    def test_agent_ids_must_match_seats(self, arith_problem):
        agents = fresh_agents(arith_problem)
        with pytest.raises(ValidationError):
            run_debate_paired(
                arith_problem, list(reversed(agents)), self.config(), seed=1
            )

    def test_mode_mismatch_rejected(self, arith_problem):
        config = DebateConfig(
            n_agents=2, n_turns=1, n_rollouts=2, rollout_mode=MODE_PROBE
        )
        with pytest.raises(ValidationError):
            run_debate_paired(arith_problem, fresh_agents(arith_problem), config)


class TestProbeMode:
    def test_shapes(self, probe_transcript):
        cfg = probe_transcript.config
        assert len(probe_transcript.probes) == cfg.n_agents * cfg.n_rollouts * cfg.n_turns
        # single main trajectory
        assert {r.trajectory_id for r in probe_transcript.responses} == {0}
        assert len(probe_transcript.responses) == cfg.n_agents * cfg.n_turns

    def test_reports_come_from_probes(self, probe_transcript):
        assert recompute_reports(probe_transcript) == probe_transcript.reports

    def test_same_seed_same_transcript(self, arith_problem):
        config = DebateConfig(
            n_agents=2, n_turns=2, n_rollouts=8, rollout_mode=MODE_PROBE
        )
        t1 = run_debate_probe(arith_problem, fresh_agents(arith_problem), config, seed=3)
        t2 = run_debate_probe(arith_problem, fresh_agents(arith_problem), config, seed=3)
        assert t1.responses == t2.responses
        assert t1.probes == t2.probes

    def test_greedy_continuation_is_stable_across_seeds(self, arith_problem):
        config = DebateConfig(
            n_agents=2,
            n_turns=1,
            n_rollouts=4,
            rollout_mode=MODE_PROBE,
            greedy_continuation=True,
        )
        t1 = run_debate_probe(arith_problem, fresh_agents(arith_problem), config, seed=3)
        t2 = run_debate_probe(arith_problem, fresh_agents(arith_problem), config, seed=4)
        assert [r.text for r in t1.responses] == [r.text for r in t2.responses]

    def test_probes_do_not_feed_the_next_turn(self, arith_problem):
        # with K probes vs 1 probe, the main trajectory must be unchanged
        base = DebateConfig(n_agents=2, n_turns=3, n_rollouts=1, rollout_mode=MODE_PROBE)
        wide = DebateConfig(n_agents=2, n_turns=3, n_rollouts=16, rollout_mode=MODE_PROBE)
        t1 = run_debate_probe(arith_problem, fresh_agents(arith_problem), base, seed=3)
        t2 = run_debate_probe(arith_problem, fresh_agents(arith_problem), wide, seed=3)
        assert t1.responses == t2.responses
