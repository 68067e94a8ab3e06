import json

import pytest

from debate_uq.cli import cli_main
from debate_uq.config import apply_overrides, load_experiment_config
from debate_uq.errors import ValidationError
from debate_uq.storage import load_training_batch, load_transcript

BASE_TOML = """
dataset = "{dataset}"
out = "{out}"
seed = 11

[debate]
n_agents = 2
n_turns = 2
n_rollouts = 4

[[agents]]
kind = "mock-bayesian"
conformity = 0.5

[[agents]]
kind = "mock-bayesian"
conformity = 0.5

[rewards]
alpha_au = 0.25
eta = 0.25
"""


@pytest.fixture()
def workspace(tmp_path):
    dataset = tmp_path / "problems.jsonl"
    dataset.write_text(
        '{"id": "add-1", "question": "What is 2+3?", "answer": "5"}\n'
        '{"id": "frac-1", "question": "What is 3/4 - 1/8?", "answer": "\\\\frac{5}{8}"}\n',
        encoding="utf-8",
    )
    config = tmp_path / "exp.toml"
    config.write_text(
        BASE_TOML.format(dataset=dataset, out=tmp_path / "run"), encoding="utf-8"
    )
    return tmp_path, config


class TestConfigLoading:
    def test_loads_everything(self, workspace):
        _, path = workspace
        cfg = load_experiment_config(path)
        assert cfg.seed == 11
        assert cfg.debate.n_agents == 2
        assert len(cfg.agents) == 2
        assert cfg.agents[0].params["conformity"] == 0.5
        assert cfg.rewards.alpha_au == 0.25

    def test_env_interpolation(self, tmp_path, monkeypatch):
        monkeypatch.setenv("DATASET_DIR", str(tmp_path))
        (tmp_path / "p.jsonl").write_text(
            '{"id": "x", "question": "q", "answer": "1"}\n', encoding="utf-8"
        )
        config = tmp_path / "exp.toml"
        config.write_text(
            'dataset = "${DATASET_DIR}/p.jsonl"\nout = "o"\n'
            "[debate]\nn_agents = 2\nn_turns = 1\nn_rollouts = 1\n"
            '[[agents]]\nkind = "mock-bayesian"\n'
            '[[agents]]\nkind = "mock-bayesian"\n',
            encoding="utf-8",
        )
        cfg = load_experiment_config(config)
        assert cfg.dataset == f"{tmp_path}/p.jsonl"

    @pytest.mark.parametrize(
        "body, message",
        [
            ("dataset = 'd'\n[[agents]]\nkind='mock-bayesian'\n", r"\[debate\]"),
            (
                "dataset = 'd'\n[debate]\nn_agents = 2\nn_turns = 1\nn_rollouts = 1\n",
                "agents",
            ),
            (
                "dataset = 'd'\n[debate]\nn_agents = 2\nn_turns = 1\nn_rollouts = 1\n"
                "[[agents]]\nkind='mock-bayesian'\n",
                "agent tables",
            ),
            (
                "[debate]\nn_agents = 2\nn_turns = 1\nn_rollouts = 1\n"
                "[[agents]]\nkind='mock-bayesian'\n[[agents]]\nkind='mock-bayesian'\n",
                "dataset",
            ),
            (
                "dataset = 'd'\n[debate]\nn_agents = 2\nn_turns = 1\nn_rollouts = 1\n"
                "bogus = 3\n"
                "[[agents]]\nkind='mock-bayesian'\n[[agents]]\nkind='mock-bayesian'\n",
                "unknown",
            ),
        ],
    )
    def test_invalid_configs(self, tmp_path, body, message):
        path = tmp_path / "exp.toml"
        path.write_text(body, encoding="utf-8")
        with pytest.raises(ValidationError, match=message):
            load_experiment_config(path)

    def test_toml_syntax_error_is_wrapped(self, tmp_path):
        path = tmp_path / "exp.toml"
        path.write_text("dataset = [unclosed", encoding="utf-8")
        with pytest.raises(ValidationError):
            load_experiment_config(path)

    def test_agent_missing_kind(self, tmp_path):
        path = tmp_path / "exp.toml"
        path.write_text(
            "dataset = 'd'\n[debate]\nn_agents = 2\nn_turns = 1\nn_rollouts = 1\n"
            "[[agents]]\nmodel = 'm'\n[[agents]]\nkind = 'mock-bayesian'\n",
            encoding="utf-8",
        )
        with pytest.raises(ValidationError, match="kind"):
            load_experiment_config(path)


class TestOverrides:
    def test_scalar_overrides(self, workspace):
        _, path = workspace
        cfg = apply_overrides(
            load_experiment_config(path), seed=99, n_rollouts=16, n_turns=5
        )
        assert cfg.seed == 99
        assert cfg.debate.n_rollouts == 16
        assert cfg.debate.n_turns == 5

    def test_growing_agents_replicates_last_table(self, workspace):
        _, path = workspace
        cfg = apply_overrides(load_experiment_config(path), n_agents=4)
        assert len(cfg.agents) == 4
        assert [a.agent_id for a in cfg.agents] == [0, 1, 2, 3]
        assert cfg.agents[3].kind == "mock-bayesian"

    def test_shrinking_agents_truncates(self, workspace):
        _, path = workspace
        cfg = apply_overrides(load_experiment_config(path), n_agents=2)
        assert len(cfg.agents) == 2


class TestCli:
    def test_usage_error_exits_2(self, capsys):
        assert cli_main(["debate"]) == 2
        assert cli_main(["not-a-command"]) == 2

    def test_help_exits_0(self, capsys):
        assert cli_main(["--help"]) == 0

    def test_runtime_error_exits_1(self, capsys, workspace):
        tmp_path, config = workspace
        code = cli_main(
            ["debate", "--config", str(config), "--dataset", "/does/not/exist.jsonl"]
        )
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_debate_writes_transcripts_and_metrics(self, workspace, capsys):
        tmp_path, config = workspace
        assert cli_main(["debate", "--config", str(config)]) == 0
        run = tmp_path / "run"
        t = load_transcript(run / "transcripts" / "add-1.jsonl")
        assert t.problem_id == "add-1"
        assert (run / "metrics" / "turn_metrics.csv").exists()
        assert (run / "metrics" / "flip_transitions.csv").exists()

    def test_same_seed_runs_are_byte_identical(self, workspace):
        tmp_path, config = workspace
        assert cli_main(["debate", "--config", str(config), "--out", str(tmp_path / "r1")]) == 0
        assert cli_main(["debate", "--config", str(config), "--out", str(tmp_path / "r2")]) == 0
        for rel in (
            "transcripts/add-1.jsonl",
            "transcripts/frac-1.jsonl",
            "metrics/turn_metrics.csv",
            "metrics/flip_transitions.csv",
        ):
            a = (tmp_path / "r1" / rel).read_bytes()
            b = (tmp_path / "r2" / rel).read_bytes()
            assert a == b, rel

    def test_probe_subcommand(self, workspace):
        tmp_path, config = workspace
        out = tmp_path / "probe-run"
        assert cli_main(
            ["probe", "--config", str(config), "--out", str(out), "-K", "8"]
        ) == 0
        t = load_transcript(out / "transcripts" / "add-1.jsonl")
        assert t.probes
        assert t.config.rollout_mode == "per-turn-probe"

    def test_simulate_suites(self, capsys):
        assert cli_main(["simulate", "--suite", "log-odds", "--trials", "50"]) == 0
        out = capsys.readouterr().out
        assert "log-odds" in out and "0 failures" in out
        assert cli_main(["simulate", "--suite", "hetero-gain", "--trials", "50"]) == 0
        assert "hetero-gain" in capsys.readouterr().out
        assert cli_main(["simulate", "--suite", "bogus"]) == 2

    def test_rewards_subcommand(self, workspace, capsys):
        tmp_path, config = workspace
        assert cli_main(["debate", "--config", str(config)]) == 0
        transcript_path = tmp_path / "run" / "transcripts" / "add-1.jsonl"
        batch_path = tmp_path / "batch.jsonl"
        assert cli_main(
            ["rewards", "--transcript", str(transcript_path), "--out", str(batch_path)]
        ) == 0
        header, rows = load_training_batch(batch_path)
        assert header["record_count"] == len(rows) > 0

    def test_analyze_matches_run_metrics(self, workspace):
        tmp_path, config = workspace
        assert cli_main(["debate", "--config", str(config)]) == 0
        run = tmp_path / "run"
        out = tmp_path / "reanalyzed"
        assert cli_main(
            [
                "analyze",
                "--transcript",
                str(run / "transcripts" / "add-1.jsonl"),
                str(run / "transcripts" / "frac-1.jsonl"),
                "--out",
                str(out),
            ]
        ) == 0
        original = (run / "metrics" / "turn_metrics.csv").read_bytes()
        recomputed = (out / "turn_metrics.csv").read_bytes()
        assert original == recomputed

    def test_bits_flag(self, workspace):
        tmp_path, config = workspace
        out = tmp_path / "bits-run"
        assert cli_main(
            ["debate", "--config", str(config), "--out", str(out), "--bits"]
        ) == 0
        with open(out / "metrics" / "turn_metrics.jsonl", encoding="utf-8") as fh:
            row = json.loads(fh.readline())
        nats_out = tmp_path / "nats-run"
        assert cli_main(["debate", "--config", str(config), "--out", str(nats_out)]) == 0
        with open(nats_out / "metrics" / "turn_metrics.jsonl", encoding="utf-8") as fh:
            nat_row = json.loads(fh.readline())
        assert row["total"] == pytest.approx(nat_row["total"] / 0.6931471805599453)

    def test_parallel_flag_keeps_bytes(self, workspace):
        tmp_path, config = workspace
        assert cli_main(["debate", "--config", str(config), "--out", str(tmp_path / "s1")]) == 0
        assert cli_main(
            ["debate", "--config", str(config), "--out", str(tmp_path / "s2"), "--parallel", "3"]
        ) == 0
        a = (tmp_path / "s1" / "metrics" / "turn_metrics.csv").read_bytes()
        b = (tmp_path / "s2" / "metrics" / "turn_metrics.csv").read_bytes()
        assert a == b
