"""CLI subcommands, config handling, and exit codes."""

import json

import pytest

from ddlqr.cli import main

SCALAR_SYSTEM = {"A": [[1.0]], "B": [[1.0]]}
SCALAR_WEIGHTS = {"Qx": [[1.0]], "Qf": [[1.0]], "R": [[1.0]], "N": 1}


@pytest.fixture
def system_file(tmp_path):
    path = tmp_path / "system.json"
    path.write_text(json.dumps(SCALAR_SYSTEM))
    return str(path)


@pytest.fixture
def weights_file(tmp_path):
    path = tmp_path / "weights.json"
    path.write_text(json.dumps(SCALAR_WEIGHTS))
    return str(path)


class TestCollect:
    def test_writes_experiment(self, system_file, tmp_path):
        out = tmp_path / "data.json"
        code = main(["collect", "--system", system_file, "--T", "10",
                     "--seed", "1", "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert set(doc) >= {"U0T", "X0T", "X1T"}

    def test_data_poor_exit_code(self, tmp_path):
        # Two samples cannot excite a 3-state system.
        path = tmp_path / "sys3.json"
        path.write_text(json.dumps({
            "A": [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.1, 0.2, 0.3]],
            "B": [[0.0], [0.0], [1.0]],
        }))
        out = tmp_path / "data.json"
        code = main(["collect", "--system", str(path), "--T", "2",
                     "--seed", "1", "--out", str(out)])
        assert code == 3

    def test_missing_file_is_usage_error(self, tmp_path):
        code = main(["collect", "--system", str(tmp_path / "nope.json"), "--T", "5"])
        assert code == 1


class TestSolve:
    def test_mb_scalar(self, system_file, weights_file, tmp_path, capsys):
        out = tmp_path / "sol.json"
        code = main(["solve", "--mode", "mb", "--system", system_file,
                     "--weights", weights_file, "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert abs(doc["objective"] - 2.5) <= 1e-6
        assert set(doc) >= {"gains", "objective", "mode", "gap", "iters"}

    def test_round_trip_collect_then_dd(self, system_file, weights_file, tmp_path):
        data = tmp_path / "data.json"
        assert main(["collect", "--system", system_file, "--T", "10",
                     "--seed", "2", "--out", str(data)]) == 0
        out = tmp_path / "sol.json"
        code = main(["solve", "--mode", "dd", "--data", str(data),
                     "--weights", weights_file, "--out", str(out)])
        assert code == 0
        assert abs(json.loads(out.read_text())["objective"] - 2.5) <= 1e-6

    def test_dd_without_data_is_usage(self, weights_file):
        assert main(["solve", "--mode", "dd", "--weights", weights_file]) == 1

    def test_rank_deficient_data_exit_code(self, weights_file, tmp_path):
        data = tmp_path / "poor.json"
        zeros = [[0.0, 0.0, 0.0]]
        data.write_text(json.dumps({"U0T": zeros, "X0T": zeros, "X1T": zeros}))
        code = main(["solve", "--mode", "dd", "--data", str(data),
                     "--weights", weights_file])
        assert code == 3


class TestRiccati:
    def test_scalar(self, system_file, weights_file, tmp_path):
        out = tmp_path / "ric.json"
        code = main(["riccati", "--system", system_file,
                     "--weights", weights_file, "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert abs(doc["gains"][0][0][0] + 0.5) <= 1e-12
        assert abs(doc["expected_cost"] - 2.5) <= 1e-12


class TestMonteCarlo:
    def test_deterministic_output_files(self, tmp_path):
        outs = []
        for name in ("a.csv", "b.csv"):
            out = tmp_path / name
            code = main(["montecarlo", "--trials", "2", "--seed", "1",
                         "--out", str(out)])
            assert code == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_check_passes_on_clean_run(self, tmp_path):
        code = main(["montecarlo", "--trials", "2", "--seed", "1",
                     "--out", str(tmp_path / "r.csv"), "--check",
                     "--summary", str(tmp_path / "s.json")])
        assert code == 0
        summary = json.loads((tmp_path / "s.json").read_text())
        assert summary["n_ok"] == 2


class TestReactor:
    def test_horizon_thirty_row_count(self, tmp_path):
        out = tmp_path / "traj.csv"
        code = main(["reactor", "--N", "30", "--seed", "2", "--out", str(out)])
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 32  # header + 31 state rows

    def test_check(self, tmp_path):
        code = main(["reactor", "--seed", "1", "--out", str(tmp_path / "t.csv"),
                     "--check"])
        assert code == 0


class TestConfig:
    def test_config_supplies_defaults(self, system_file, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"T": 10, "seed": 3}))
        out = tmp_path / "data.json"
        code = main(["--config", str(config), "collect",
                     "--system", system_file, "--out", str(out)])
        assert code == 0
        assert len(json.loads(out.read_text())["U0T"][0]) == 10

    def test_flags_override_config(self, system_file, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"T": 10}))
        out = tmp_path / "data.json"
        code = main(["--config", str(config), "collect", "--system", system_file,
                     "--T", "12", "--out", str(out)])
        assert code == 0
        assert len(json.loads(out.read_text())["U0T"][0]) == 12

    def test_unknown_config_keys_rejected(self, system_file, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"bogus": 1}))
        code = main(["--config", str(config), "collect", "--system", system_file])
        assert code == 1
