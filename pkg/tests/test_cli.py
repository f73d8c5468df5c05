import json
import os

import numpy as np
import pytest

from ccopt.cli import main
from ccopt.optimize import scenario_sample_bound

TINY_BENCH = [
    "--map-n-u", "40", "--n-delta-list", "20", "60", "--hidden", "16",
    "--ref-per-axis", "8", "8", "--ref-n-delta", "200",
    "--solve-n-delta", "60", "--explore-iterations", "10", "--explore-batch", "10",
    "--parallel-n-u", "8", "--parallel-iterations", "5",
    "--scenarios", "60", "--scenario-restarts", "2", "--scenario-iterations", "16",
    "--oracle-n", "500",
]


def train_small_map(tmp_path, name="map.json", seed="7"):
    out = tmp_path / name
    code = main([
        "train-map", "--problem", "paper-ncvx-2d", "--n-u", "60", "--n-delta", "80",
        "--hidden", "16", "--seed", seed, "--out", str(out),
        "--holdout-points", "20", "--holdout-n-delta", "100",
    ])
    assert code == 0
    return out


class TestTrainMap:
    def test_deterministic_model_files(self, tmp_path, capsys):
        a = train_small_map(tmp_path, "a.json")
        b = train_small_map(tmp_path, "b.json")
        assert a.read_bytes() == b.read_bytes()
        out = capsys.readouterr().out
        assert "holdout_mae=" in out and "n_u=60" in out

    def test_different_seed_differs(self, tmp_path):
        a = train_small_map(tmp_path, "a.json", seed="7")
        b = train_small_map(tmp_path, "b.json", seed="8")
        assert a.read_bytes() != b.read_bytes()

    def test_unknown_problem_usage_error(self, tmp_path, capsys):
        code = main(["train-map", "--problem", "missing", "--out",
                     str(tmp_path / "x.json")])
        assert code == 2
        assert "unknown problem" in capsys.readouterr().err

    def test_zero_n_delta_usage_error(self, tmp_path, capsys):
        code = main(["train-map", "--n-delta", "0", "--out", str(tmp_path / "x.json")])
        assert code == 2


class TestSolve:
    def test_proposed_with_map_file(self, tmp_path, capsys):
        mpath = train_small_map(tmp_path)
        out = tmp_path / "result.json"
        code = main([
            "solve", "--method", "proposed", "--map", str(mpath),
            "--alpha", "0.05", "--alpha-eps", "0.005",
            "--iterations", "10", "--batch", "10", "--oracle-n", "300",
            "--seed", "1", "--out", str(out),
        ])
        assert code == 0
        doc = json.loads(out.read_text())
        costs = doc["trajectory_cost"]
        assert all(b <= a for a, b in zip(costs, costs[1:]))
        assert doc["seed"] == 1
        assert doc["config"]["alpha"] == 0.05
        assert "cost=" in capsys.readouterr().out

    def test_scenario_count_from_bound(self, tmp_path):
        n = scenario_sample_bound(0.05, 0.01, 2)
        out = tmp_path / "result.json"
        code = main([
            "solve", "--method", "scenario", "--scenarios", str(n),
            "--iterations", "20", "--restarts", "2", "--oracle-n", "300",
            "--seed", "3", "--out", str(out),
        ])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["config"]["n_scenarios"] == 484
        assert len(doc["scenarios"]) == 484

    def test_parallel(self, tmp_path):
        out = tmp_path / "result.json"
        code = main([
            "solve", "--method", "parallel", "--n-u", "10", "--n-delta", "50",
            "--iterations", "5", "--oracle-n", "300", "--seed", "2",
            "--out", str(out),
        ])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["n_constraint_evals"] == 5 * 10 * 50

    def test_unknown_method_exit_2(self):
        assert main(["solve", "--method", "annealing"]) == 2

    def test_infeasible_exit_3(self, tmp_path, capsys):
        doc = {
            "name": "always-violated",
            "box": {"lower": [-1, -1], "upper": [1, 1]},
            "alpha": 0.05,
            "disturbance": {"kind": "normal"},
            "objective": "u1**2 + u2**2",
            "constraint": "1 + 0*u1 + 0*d1",
        }
        path = tmp_path / "problem.json"
        path.write_text(json.dumps(doc))
        code = main([
            "solve", "--method", "scenario", "--problem", str(path),
            "--scenarios", "5", "--iterations", "3", "--restarts", "2",
        ])
        assert code == 3
        assert "infeasible" in capsys.readouterr().err


class TestBenchmark:
    def test_layout_and_determinism(self, tmp_path):
        out1 = tmp_path / "run1"
        args = ["benchmark", "--runs", "2", "--seed", "3", "--out-dir", str(out1),
                *TINY_BENCH]
        assert main(args) == 0
        run_files = [
            os.path.join(dp, f)
            for dp, _, files in os.walk(out1 / "runs")
            for f in files
        ]
        assert len(run_files) == 2 * 3
        out2 = tmp_path / "run2"
        assert main(["benchmark", "--runs", "2", "--seed", "3", "--out-dir",
                     str(out2), *TINY_BENCH]) == 0

        def canonical(path):
            doc = json.loads((path / "report.json").read_text())
            doc.pop("wall_clock")
            doc["config"]["output_dir"] = ""
            return json.dumps(doc, sort_keys=True)

        assert canonical(out1) == canonical(out2)

    def test_zero_runs_exit_2(self, tmp_path):
        assert main(["benchmark", "--runs", "0", "--out-dir", str(tmp_path)]) == 2

    def test_skip_flags(self, tmp_path):
        out = tmp_path / "maps-only"
        assert main(["benchmark", "--runs", "1", "--seed", "0", "--skip-solvers",
                     "--out-dir", str(out), *TINY_BENCH]) == 0
        assert (out / "grids" / "reference.csv").exists()
        assert not (out / "runs").exists()


class TestConfigFile:
    def test_config_defaults_and_flag_override(self, tmp_path):
        cfg_path = tmp_path / "cli.json"
        cfg_path.write_text(json.dumps({"n_u": 50, "n_delta": 40, "hidden": 12,
                                        "holdout_points": 10, "holdout_n_delta": 50}))
        out = tmp_path / "m.json"
        code = main(["train-map", "--config", str(cfg_path), "--seed", "4",
                     "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["model"]["hidden_count"] == 12
        out2 = tmp_path / "m2.json"
        code = main(["train-map", "--config", str(cfg_path), "--seed", "4",
                     "--hidden", "9", "--out", str(out2)])
        assert code == 0
        assert json.loads(out2.read_text())["model"]["hidden_count"] == 9

    def test_missing_config_file(self, tmp_path):
        assert main(["train-map", "--config", str(tmp_path / "nope.json")]) == 2
