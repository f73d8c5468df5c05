import json
import os

import numpy as np
import pytest

from ccopt import bench


def tiny_config(out_dir, **overrides):
    """Matched small budgets: 40x60 = 2400 constraint evaluations per method."""
    cfg = dict(
        problem="paper-ncvx-2d",
        output_dir=str(out_dir),
        base_seed=11,
        run_count=2,
        map_n_u=40,
        n_delta_list=(20, 60),
        hidden_count=16,
        ref_per_axis=(8, 8),
        ref_n_delta=200,
        solve_n_delta=60,
        explore_iterations=10,
        explore_batch=10,
        parallel_n_u=8,
        parallel_iterations=5,
        scenario_count=60,
        scenario_restarts=2,
        scenario_iterations=16,
        scenario_init_draws=4,
        oracle_samples=500,
    )
    cfg.update(overrides)
    return bench.ExperimentConfig(**cfg)


class TestSeedsAndBudgets:
    def test_method_seeds_stable_and_distinct(self):
        seeds = {
            (m, j): bench.method_seed(5, m, j)
            for m in bench.METHODS
            for j in range(4)
        }
        assert len(set(seeds.values())) == len(seeds)
        # extending the run count must not move earlier seeds
        assert bench.method_seed(5, "proposed", 0) == seeds[("proposed", 0)]
        assert bench.method_seed(6, "proposed", 0) != seeds[("proposed", 0)]

    def test_default_budgets_matched(self):
        cfg = bench.ExperimentConfig()
        budget = bench.constraint_budget(cfg)
        values = list(budget.values())
        assert max(values) - min(values) < 0.05 * min(values) + 1

    def test_run_single_matches_analytic_budget(self, tmp_path):
        cfg = tiny_config(tmp_path)
        budget = bench.constraint_budget(cfg)
        for method in bench.METHODS:
            result = bench.run_single(
                cfg.problem, method, cfg, bench.method_seed(cfg.base_seed, method, 0)
            )
            assert result.n_constraint_evals == budget[method], method

    def test_validation(self, tmp_path):
        with pytest.raises(ValueError):
            tiny_config(tmp_path, run_count=0)
        with pytest.raises(ValueError):
            tiny_config(tmp_path, n_delta_list=())
        with pytest.raises(ValueError):
            bench.run_single("paper-ncvx-2d", "annealing", tiny_config(tmp_path), 0)


class TestMapStudy:
    def test_exports_and_table(self, tmp_path):
        cfg = tiny_config(tmp_path / "out")
        table = bench.run_map_study(cfg, cfg.output_dir)
        assert [row["n_delta"] for row in table] == [20, 60]
        for row in table:
            assert 0.0 <= row["mae"] <= 1.0
        ref_csv = os.path.join(cfg.output_dir, "grids", "reference.csv")
        lines = open(ref_csv).read().splitlines()
        assert lines[0] == "u1,u2,v"
        assert len(lines) == 1 + 64
        assert os.path.exists(os.path.join(cfg.output_dir, "grids", "map_60.csv"))
        assert os.path.exists(os.path.join(cfg.output_dir, "boundaries", "reference.csv"))

    def test_deterministic(self, tmp_path):
        a = bench.run_map_study(tiny_config(tmp_path / "a"))
        b = bench.run_map_study(tiny_config(tmp_path / "b"))
        assert a == b


class TestSolverComparison:
    def test_layout_and_aggregates(self, tmp_path):
        cfg = tiny_config(tmp_path / "out")
        report = bench.run_solver_comparison(cfg, cfg.output_dir)
        for method in bench.METHODS:
            records = report.methods[method]
            assert len(records) == cfg.run_count
            run_dir = os.path.join(cfg.output_dir, "runs", method)
            assert len(os.listdir(run_dir)) == cfg.run_count
            agg = report.aggregates[method]
            costs = [r["cost"] for r in records]
            viols = [r["oracle_violation"] for r in records]
            assert agg["mean_cost"] == float(np.mean(costs))
            assert agg["sd_cost"] == float(np.std(costs))
            assert agg["mean_violation"] == float(np.mean(viols))
            assert agg["sd_violation"] == float(np.std(viols))
            for v in viols:
                assert 0.0 <= v <= 1.0

    def test_single_run_report(self, tmp_path):
        cfg = tiny_config(tmp_path / "out", run_count=1)
        report = bench.run_solver_comparison(cfg)
        assert all(len(report.methods[m]) == 1 for m in bench.METHODS)

    def test_byte_identical_reports(self, tmp_path):
        r1 = bench.run_solver_comparison(tiny_config(tmp_path / "a"))
        r2 = bench.run_solver_comparison(tiny_config(tmp_path / "b"))
        for r in (r1, r2):
            r.wall_clock = {}
            r.config["output_dir"] = ""
        assert bench.report_to_json(r1) == bench.report_to_json(r2)

    def test_workers_do_not_change_results(self, tmp_path):
        serial = bench.run_solver_comparison(tiny_config(tmp_path / "a", workers=1))
        pooled = bench.run_solver_comparison(tiny_config(tmp_path / "b", workers=2))
        for r in (serial, pooled):
            r.wall_clock = {}
            r.config["output_dir"] = ""
            r.config["workers"] = 0
        assert bench.report_to_json(serial) == bench.report_to_json(pooled)

    def test_run_failures_recorded_not_fatal(self, tmp_path):
        # a constraint violated everywhere leaves the scenario program
        # infeasible while the other methods still return their start points
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
        cfg = tiny_config(tmp_path / "out", problem=str(path), run_count=1)
        report = bench.run_solver_comparison(cfg, cfg.output_dir)
        assert report.methods["scenario"][0]["error"] is not None
        assert report.aggregates["scenario"]["mean_cost"] is None
        assert report.methods["parallel"][0]["error"] is None
        assert report.methods["proposed"][0]["error"] is None


class TestExportReport:
    def test_full_layout(self, tmp_path):
        cfg = tiny_config(tmp_path / "out")
        report = bench.run_benchmark(cfg)
        for rel in ("report.json", "summary.csv", "trajectories.csv", "scatter.csv",
                    "grids", "boundaries", "runs"):
            assert os.path.exists(os.path.join(cfg.output_dir, rel)), rel
        assert report.map_accuracy

    def test_summary_schema(self, tmp_path):
        cfg = tiny_config(tmp_path / "out")
        report = bench.run_solver_comparison(cfg)
        bench.export_report(report, "csv", cfg.output_dir)
        lines = open(os.path.join(cfg.output_dir, "summary.csv")).read().splitlines()
        assert lines[0] == "method,mean_cost,sd_cost,mean_viol,sd_viol"
        assert len(lines) == 4
        assert [ln.split(",")[0] for ln in lines[1:]] == ["parallel", "proposed", "scenario"]

    def test_empty_report_header_only(self, tmp_path):
        report = bench.BenchmarkReport(config={}, methods={}, aggregates={})
        bench.export_report(report, "csv", str(tmp_path))
        assert open(tmp_path / "trajectories.csv").read() == "method,iteration,mean_cost\n"
        assert open(tmp_path / "summary.csv").read() == "method,mean_cost,sd_cost,mean_viol,sd_viol\n"

    def test_json_round_trip(self, tmp_path):
        cfg = tiny_config(tmp_path / "out", run_count=1)
        report = bench.run_solver_comparison(cfg)
        path = os.path.join(str(tmp_path), "report.json")
        bench.export_report(report, "json", path)
        loaded = bench.load_report(path)
        assert loaded.methods == report.methods
        assert loaded.aggregates == report.aggregates
        assert loaded.config == report.config

    def test_unknown_format(self, tmp_path):
        report = bench.BenchmarkReport(config={}, methods={}, aggregates={})
        with pytest.raises(ValueError):
            bench.export_report(report, "xml", str(tmp_path))
