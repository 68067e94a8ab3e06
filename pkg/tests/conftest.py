import pytest

from debate_uq.agents import make_agent

# One line per acceptance criterion, echoed after the test summary so the
# pass/fail ledger is visible without -s.
ACCEPTANCE_LINES: list = []


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
from debate_uq.engine import run_debate_paired, run_debate_probe
from debate_uq.model import (
    MODE_PROBE,
    AgentSpec,
    DebateConfig,
    Problem,
    SamplingParams,
)


def mock_specs(n, **params):
    return [
        AgentSpec(agent_id=i, kind="mock-bayesian", sampling=SamplingParams(), params=dict(params))
        for i in range(n)
    ]


@pytest.fixture(scope="session")
def arith_problem():
    return Problem(problem_id="arith-1", question="What is 2+3?", ground_truth="5")


@pytest.fixture(scope="session")
def paired_transcript(arith_problem):
    config = DebateConfig(n_agents=2, n_turns=3, n_rollouts=8)
    agents = [make_agent(s, arith_problem) for s in mock_specs(2, conformity=0.5)]
    return run_debate_paired(arith_problem, agents, config, seed=7)


@pytest.fixture(scope="session")
def probe_transcript(arith_problem):
    config = DebateConfig(
        n_agents=2, n_turns=3, n_rollouts=16, rollout_mode=MODE_PROBE
    )
    agents = [make_agent(s, arith_problem) for s in mock_specs(2, conformity=0.5)]
    return run_debate_probe(arith_problem, agents, config, seed=7)
