"""Tests for the command-line interface."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from torustab import THR2, TorusConfig, is_stable
from torustab.cli import CSV_HEADER, ExperimentConfig, TrialRecord, emit_csv, main


@pytest.fixture
def runner():
    return CliRunner()


def grid_text(a):
    return TorusConfig(a).to_text()


ALL_ZERO_8 = grid_text(np.zeros((8, 8), np.uint8))


class TestStable:
    def test_all_zero_accepts(self, runner):
        res = runner.invoke(main, ["stable", "--rule", "thr2"], input=ALL_ZERO_8)
        assert res.exit_code == 0 and "stable" in res.output

    def test_unstable_exits_one(self, runner):
        a = np.zeros((8, 8), np.uint8)
        a[3, 3] = 1
        res = runner.invoke(main, ["stable", "--rule", "thr2"], input=grid_text(a))
        assert res.exit_code == 1

    def test_json_verdict(self, runner):
        res = runner.invoke(main, ["stable", "--json"], input=ALL_ZERO_8)
        assert json.loads(res.output)["result"] == "Stable"

    def test_malformed_grid_usage_error(self, runner):
        res = runner.invoke(main, ["stable"], input="4 4\n0000\n0000\n")
        assert res.exit_code == 2

    def test_bad_characters_usage_error(self, runner):
        res = runner.invoke(main, ["stable"], input="1 4\n01x0\n")
        assert res.exit_code == 2


class TestStep:
    def test_single_step(self, runner):
        a = np.zeros((6, 6), np.uint8)
        a[2, 2:4] = 1
        a[3, 2:4] = 1
        res = runner.invoke(main, ["step", "--rule", "thr2"], input=grid_text(a))
        assert res.exit_code == 0
        from torustab.grid import apply_rule

        assert TorusConfig.from_text(res.output) == apply_rule(TorusConfig(a), THR2)

    def test_zero_steps_identity(self, runner):
        res = runner.invoke(main, ["step", "--steps", "0"], input=ALL_ZERO_8)
        assert res.output == ALL_ZERO_8

    def test_negative_steps_rejected(self, runner):
        res = runner.invoke(main, ["step", "--steps", "-1"], input=ALL_ZERO_8)
        assert res.exit_code == 2


class TestStructure:
    def test_thr2_verdict_json(self, runner):
        a = np.zeros((6, 6), np.uint8)
        a[2, 2] = 1
        res = runner.invoke(main, ["structure", "--rule", "thr2", "--json"], input=grid_text(a))
        assert res.exit_code == 1
        payload = json.loads(res.output)
        assert payload["result"] == "Violation" and payload["witness_cells"] == [[2, 2]]

    def test_majority_ok(self, runner):
        a = np.zeros((8, 8), np.uint8)
        a[2:5, :] = 1
        res = runner.invoke(main, ["structure", "--rule", "maj"], input=grid_text(a))
        assert res.exit_code == 0

    def test_unsupported_rule(self, runner):
        res = runner.invoke(main, ["structure", "--rule", "thr4"], input=ALL_ZERO_8)
        assert res.exit_code == 2


class TestTest:
    def test_stable_accepts(self, runner):
        res = runner.invoke(main, ["test", "--eps", "0.2", "--seed", "5", "--json"], input=ALL_ZERO_8)
        assert res.exit_code == 0
        assert json.loads(res.output)["result"] == "Accept"

    def test_reject_carries_witness(self, runner):
        a = np.zeros((8, 8), np.uint8)
        a[3, 3] = 1
        res = runner.invoke(main, ["test", "--eps", "0.2", "--json"], input=grid_text(a))
        assert res.exit_code == 1
        payload = json.loads(res.output)
        assert payload["result"] == "Reject" and "witness" in payload

    def test_bad_eps(self, runner):
        res = runner.invoke(main, ["test", "--eps", "1.7"], input=ALL_ZERO_8)
        assert res.exit_code == 2


class TestStabilize:
    def test_output_is_stable(self, runner, tmp_path):
        rng = np.random.default_rng(71)
        a = (rng.random((12, 12)) < 0.4).astype(np.uint8)
        out_file = tmp_path / "out.grid"
        res = runner.invoke(
            main,
            ["stabilize", "--eps", "0.3", "--out", str(out_file)],
            input=grid_text(a),
        )
        assert res.exit_code == 0
        cfg = TorusConfig.from_text(out_file.read_text())
        assert is_stable(cfg, THR2)

    def test_json_report(self, runner):
        res = runner.invoke(main, ["stabilize", "--eps", "0.3", "--json"], input=ALL_ZERO_8)
        assert res.exit_code == 0
        # The grid goes to stdout, the report to stderr.
        payload = json.loads(res.stderr.strip().split("\n")[-1])
        assert payload["modified"]["total"] == 0


class TestGen:
    def test_stable_instance_roundtrip(self, runner):
        res = runner.invoke(main, ["gen", "--instance", "stable-thr2", "--n", "24", "--seed", "2"])
        assert res.exit_code == 0
        cfg = TorusConfig.from_text(res.output)
        assert is_stable(cfg, THR2)

    def test_hard_instance_bad_n(self, runner):
        res = runner.invoke(main, ["gen", "--instance", "hard-thr2", "--n", "13"])
        assert res.exit_code == 2

    def test_deterministic_given_seed(self, runner):
        args = ["gen", "--instance", "stable-thr2", "--n", "20", "--seed", "9"]
        out1 = runner.invoke(main, args).output
        out2 = runner.invoke(main, args).output
        assert out1 == out2


class TestBench:
    def test_csv_shape(self, runner, tmp_path):
        out = tmp_path / "r.csv"
        res = runner.invoke(
            main,
            [
                "bench",
                "--instance",
                "hard-thr2",
                "--n",
                "32",
                "--eps",
                "0.2",
                "--trials",
                "7",
                "--out",
                str(out),
            ],
        )
        assert res.exit_code == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == ",".join(CSV_HEADER)
        assert len(lines) == 8
        decisions = {line.split(",")[6] for line in lines[1:]}
        assert decisions <= {"accept", "reject"}

    def test_deterministic_csv(self, runner, tmp_path):
        args = lambda p: [
            "bench",
            "--instance",
            "hard-thr2",
            "--n",
            "32",
            "--eps",
            "0.2",
            "--trials",
            "5",
            "--seed",
            "3",
            "--algorithm",
            "naive",
            "--out",
            str(p),
        ]
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        runner.invoke(main, args(p1))
        runner.invoke(main, args(p2))
        c1 = [line.rsplit(",", 1)[0] for line in p1.read_text().split("\n")]
        c2 = [line.rsplit(",", 1)[0] for line in p2.read_text().split("\n")]
        assert c1 == c2  # identical apart from wall-clock column


class TestEmitCsv:
    def test_zero_records(self, tmp_path):
        p = tmp_path / "empty.csv"
        emit_csv([], str(p))
        assert p.read_text() == ",".join(CSV_HEADER) + "\n"

    def test_ordering_by_trial(self, tmp_path):
        recs = [
            TrialRecord(2, 4, 4, 0.1, 2, "structural", "accept", 16, 1.0),
            TrialRecord(0, 4, 4, 0.1, 0, "structural", "reject", 16, 1.0),
            TrialRecord(1, 4, 4, 0.1, 1, "structural", "accept", 16, 1.0),
        ]
        p = tmp_path / "ordered.csv"
        emit_csv(recs, str(p))
        trials = [line.split(",")[0] for line in p.read_text().strip().split("\n")[1:]]
        assert trials == ["0", "1", "2"]


class TestExperimentConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(instance="hard-thr2", n=16, eps=0.1, trials=0, seed=0)
        with pytest.raises(ValueError):
            ExperimentConfig(instance="hard-thr2", n=16, eps=2.0, trials=1, seed=0)
        cfg = ExperimentConfig(instance="hard-thr2", n=16, eps=0.1, trials=1, seed=0)
        assert cfg.c3 == 4
