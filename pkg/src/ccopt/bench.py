"""Reproduction harness: map-accuracy study and seeded solver comparison.

The map study builds a dense Monte-Carlo reference grid, trains violation
maps at several disturbance budgets (snapshots of one stream), and exports
grids, level-set boundaries and accuracy metrics. The solver comparison
runs the three methods over matched constraint-evaluation budgets for a
configurable number of seeded repetitions and aggregates costs and
referee-estimated violations. Everything is deterministic in the base
seed; per-run seeds are derived so that adding runs never changes the
seeds of earlier ones.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import vmap as vm
from .optimize import (
    ExplorationConfig,
    RandomSearchConfig,
    default_search_config,
    explore_optimizer,
    parallel_randomized,
    scenario_solve,
    solve_result_to_dict,
)
from .problem import problem_from_source

METHODS = ("proposed", "parallel", "scenario")
_REFERENCE_KEY = 100  # spawn keys disjoint from method indices
_MAP_KEY = 101


@dataclass
class ExperimentConfig:
    """Full harness configuration; defaults reproduce the desk-scale study.

    The three solver budgets are matched: with the defaults each method
    spends 800k constraint evaluations per run (map training for the
    proposed method, fresh estimates for the baseline, scenario-set sweeps
    for the scenario approach).
    """

    problem: str = "paper-ncvx-2d"
    output_dir: str = "bench-out"
    base_seed: int = 0
    workers: int = 1
    # map study
    map_n_u: int = 400
    n_delta_list: tuple = (200, 1000, 2000)
    hidden_count: int = 50
    activation: str = "sigmoid"
    ridge: float = 1e-6
    ref_per_axis: tuple = (56, 56)
    ref_n_delta: int = 10000
    boundary_level: float = 0.05
    # solver comparison
    run_count: int = 20
    solve_n_delta: int = 2000
    explore_iterations: int = 100
    explore_batch: int = 50
    alpha_margin: float = 0.005
    parallel_n_u: int = 50
    parallel_iterations: int = 8
    scenario_count: int = 2000
    scenario_restarts: int = 4
    scenario_iterations: int = 92
    scenario_init_draws: int = 8
    oracle_samples: int = 10000

    def __post_init__(self):
        self.n_delta_list = tuple(int(n) for n in self.n_delta_list)
        self.ref_per_axis = tuple(int(c) for c in self.ref_per_axis)
        if self.run_count < 1:
            raise ValueError("run_count must be >= 1")
        if not self.n_delta_list:
            raise ValueError("n_delta_list must be non-empty")

    @property
    def elm_config(self):
        return vm.ElmConfig(self.hidden_count, self.activation, self.ridge)


def _config_echo(cfg):
    # JSON-native rendering (tuples become lists) so reports round-trip exactly
    return json.loads(json.dumps(asdict(cfg)))


def constraint_budget(cfg):
    """Analytic constraint-evaluation count per run for each method."""
    return {
        "proposed": cfg.map_n_u * cfg.solve_n_delta,
        "parallel": cfg.parallel_iterations * cfg.parallel_n_u * cfg.solve_n_delta,
        "scenario": cfg.scenario_restarts
        * (cfg.scenario_init_draws + cfg.scenario_iterations)
        * cfg.scenario_count,
    }


def method_seed(base_seed, method, run_idx):
    """Stable per-run seed; independent of run_count and of other methods."""
    key = METHODS.index(method) if method in METHODS else int(method)
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(key, int(run_idx)))
    return int(ss.generate_state(1, np.uint64)[0])


def run_single(problem_source, method, cfg, seed):
    """One seeded solver run. The problem is rebuilt from its source so the
    call is safe to dispatch to a worker process."""
    spec = problem_from_source(problem_source)
    rng = np.random.default_rng(seed)
    if method == "proposed":
        trained = vm.train_violation_map(
            spec, cfg.map_n_u, cfg.solve_n_delta, cfg.elm_config, rng
        )
        ecfg = ExplorationConfig(
            alpha=spec.alpha,
            batch_size=cfg.explore_batch,
            alpha_margin=cfg.alpha_margin,
            iterations=cfg.explore_iterations,
            search=default_search_config(spec.domain.dim),
        )
        result = explore_optimizer(
            spec, trained, ecfg, rng, seed=seed, oracle_samples=cfg.oracle_samples
        )
        return replace(result, n_constraint_evals=cfg.map_n_u * cfg.solve_n_delta)
    if method == "parallel":
        return parallel_randomized(
            spec, cfg.parallel_n_u, cfg.solve_n_delta, cfg.parallel_iterations, rng,
            seed=seed, oracle_samples=cfg.oracle_samples,
        )
    if method == "scenario":
        search = RandomSearchConfig(
            max_iterations=cfg.scenario_iterations, init_draws=cfg.scenario_init_draws
        )
        return scenario_solve(
            spec, cfg.scenario_count, search, rng, restarts=cfg.scenario_restarts,
            seed=seed, oracle_samples=cfg.oracle_samples,
        )
    raise ValueError(f"unknown method {method!r}")


def _run_task(args):
    problem_source, method, cfg, seed = args
    try:
        return solve_result_to_dict(run_single(problem_source, method, cfg, seed)), None
    except Exception as exc:  # recorded per run, never fatal to the report
        return None, f"{type(exc).__name__}: {exc}"


# ---------------------------------------------------------------------------
# map study


def run_map_study(cfg, output_dir=None):
    """Reference grid vs trained maps: MAE and boundary deviation per budget.

    Returns the accuracy table (list of rows). When ``output_dir`` is given,
    exports the reference and per-map grids plus level-set boundary
    polylines under ``grids/`` and ``boundaries/``.
    """
    spec = problem_from_source(cfg.problem)
    reference = vm.build_reference_grid(
        spec, cfg.ref_per_axis, cfg.ref_n_delta,
        method_seed(cfg.base_seed, _REFERENCE_KEY, 0),
    )
    maps = vm.train_violation_maps(
        spec, cfg.map_n_u, cfg.n_delta_list, cfg.elm_config,
        np.random.default_rng(method_seed(cfg.base_seed, _MAP_KEY, 0)),
    )
    ref_boundary = vm.extract_boundary(reference, cfg.boundary_level)

    if output_dir is not None:
        grids_dir = os.path.join(output_dir, "grids")
        bounds_dir = os.path.join(output_dir, "boundaries")
        os.makedirs(grids_dir, exist_ok=True)
        os.makedirs(bounds_dir, exist_ok=True)
        vm.export_grid_csv(reference, os.path.join(grids_dir, "reference.csv"))
        vm.export_boundary_csv(ref_boundary, os.path.join(bounds_dir, "reference.csv"))

    table = []
    for n_delta in sorted(maps):
        trained = maps[n_delta]
        grid = vm.grid_from_map(trained, reference.axes)
        boundary = vm.extract_boundary(grid, cfg.boundary_level)
        row = {
            "n_delta": int(n_delta),
            "mae": vm.map_mae(trained, reference),
            "boundary_deviation": vm.chamfer_one_sided(ref_boundary, boundary),
        }
        table.append(row)
        if output_dir is not None:
            vm.export_grid_csv(grid, os.path.join(grids_dir, f"map_{n_delta}.csv"))
            vm.export_boundary_csv(
                boundary, os.path.join(bounds_dir, f"map_{n_delta}.csv")
            )
    return table


# ---------------------------------------------------------------------------
# solver comparison


@dataclass
class BenchmarkReport:
    """Comparison results with enough stored per-run data to recompute
    every aggregate exactly. All fields are JSON-native."""

    config: dict
    methods: dict
    aggregates: dict
    map_accuracy: list = field(default_factory=list)
    wall_clock: dict = field(default_factory=dict)


def _aggregate(records):
    costs = np.array([r["cost"] for r in records if r.get("error") is None], dtype=float)
    viols = np.array(
        [r["oracle_violation"] for r in records if r.get("error") is None], dtype=float
    )
    if costs.size == 0:
        return {"mean_cost": None, "sd_cost": None, "mean_violation": None,
                "sd_violation": None, "failures": len(records)}
    return {
        "mean_cost": float(costs.mean()),
        "sd_cost": float(costs.std()),
        "mean_violation": float(viols.mean()),
        "sd_violation": float(viols.std()),
        "failures": sum(1 for r in records if r.get("error") is not None),
    }


def run_solver_comparison(cfg, output_dir=None):
    """Seeded Monte-Carlo comparison of the three methods.

    Writes per-run result files under ``runs/<method>/<seed>.json`` when an
    output directory is given. Individual run failures are recorded in the
    report rather than raised.
    """
    tasks = [
        (cfg.problem, method, cfg, method_seed(cfg.base_seed, method, j))
        for method in METHODS
        for j in range(cfg.run_count)
    ]
    started = time.time()
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(_run_task, tasks))
    else:
        outcomes = [_run_task(t) for t in tasks]
    elapsed = time.time() - started

    methods = {m: [] for m in METHODS}
    for (problem_source, method, _, seed), (doc, error) in zip(tasks, outcomes):
        if doc is None:
            record = {"seed": seed, "error": error, "u": None, "cost": float("nan"),
                      "oracle_violation": float("nan"), "trajectory_cost": [],
                      "trajectory_u": []}
        else:
            record = {
                "seed": seed,
                "error": None,
                "u": doc["u"],
                "cost": doc["cost"],
                "oracle_violation": doc["oracle_violation"],
                "trajectory_cost": doc["trajectory_cost"],
                "trajectory_u": doc["trajectory_u"],
            }
            if output_dir is not None:
                run_dir = os.path.join(output_dir, "runs", method)
                os.makedirs(run_dir, exist_ok=True)
                with open(os.path.join(run_dir, f"{seed}.json"), "w") as fh:
                    json.dump(doc, fh, indent=2, sort_keys=True)
                    fh.write("\n")
        methods[method].append(record)

    report = BenchmarkReport(
        config=_config_echo(cfg),
        methods=methods,
        aggregates={m: _aggregate(methods[m]) for m in METHODS},
        wall_clock={"solver_comparison_s": elapsed},
    )
    return report


def run_benchmark(cfg, do_map_study=True, do_solvers=True):
    """Run the configured phases and write the full output layout:
    grids/, boundaries/, runs/<method>/<seed>.json, report.json, summary.csv."""
    os.makedirs(cfg.output_dir, exist_ok=True)
    report = BenchmarkReport(config=_config_echo(cfg), methods={}, aggregates={})
    timings = {}
    if do_map_study:
        t0 = time.time()
        report.map_accuracy = run_map_study(cfg, cfg.output_dir)
        timings["map_study_s"] = time.time() - t0
    if do_solvers:
        comparison = run_solver_comparison(cfg, cfg.output_dir)
        report.methods = comparison.methods
        report.aggregates = comparison.aggregates
        timings.update(comparison.wall_clock)
    report.wall_clock = timings
    export_report(report, "json", os.path.join(cfg.output_dir, "report.json"))
    export_report(report, "csv", cfg.output_dir)
    return report


# ---------------------------------------------------------------------------
# export


def report_to_json(report):
    """Canonical JSON text: sorted keys, newline-terminated."""
    return json.dumps(asdict(report), indent=2, sort_keys=True) + "\n"


def report_from_json(text):
    doc = json.loads(text)
    return BenchmarkReport(**doc)


def load_report(path):
    with open(path) as fh:
        return report_from_json(fh.read())


def _fmt(value):
    return f"{value:.9g}" if isinstance(value, float) else str(value)


def export_report(report, fmt, path):
    """Write the report as canonical JSON (``path`` is a file) or as flat
    CSV tables trajectories/scatter/summary (``path`` is a directory)."""
    if fmt == "json":
        with open(path, "w") as fh:
            fh.write(report_to_json(report))
        return [path]
    if fmt != "csv":
        raise ValueError(f"unknown export format {fmt!r}")

    os.makedirs(path, exist_ok=True)
    written = []

    traj_path = os.path.join(path, "trajectories.csv")
    with open(traj_path, "w", newline="") as fh:
        fh.write("method,iteration,mean_cost\n")
        for method in sorted(report.methods):
            rows = [r["trajectory_cost"] for r in report.methods[method]
                    if r.get("error") is None and r["trajectory_cost"]]
            if not rows:
                continue
            mean = np.mean(np.asarray(rows, dtype=float), axis=0)
            for it, value in enumerate(mean):
                fh.write(f"{method},{it},{_fmt(float(value))}\n")
    written.append(traj_path)

    scatter_path = os.path.join(path, "scatter.csv")
    dims = 0
    for method in report.methods:
        for r in report.methods[method]:
            if r.get("u"):
                dims = len(r["u"])
                break
        if dims:
            break
    with open(scatter_path, "w", newline="") as fh:
        cols = ",".join(f"u{i + 1}" for i in range(dims))
        fh.write("method,run,seed," + (cols + "," if dims else "") + "cost,violation\n")
        for method in sorted(report.methods):
            for run, r in enumerate(report.methods[method]):
                if r.get("error") is not None:
                    continue
                coords = ",".join(_fmt(float(x)) for x in r["u"])
                fh.write(
                    f"{method},{run},{r['seed']},"
                    + (coords + "," if dims else "")
                    + f"{_fmt(float(r['cost']))},{_fmt(float(r['oracle_violation']))}\n"
                )
    written.append(scatter_path)

    summary_path = os.path.join(path, "summary.csv")
    with open(summary_path, "w", newline="") as fh:
        fh.write("method,mean_cost,sd_cost,mean_viol,sd_viol\n")
        for method in sorted(report.aggregates):
            agg = report.aggregates[method]
            if agg["mean_cost"] is None:
                continue
            fh.write(
                f"{method},{_fmt(agg['mean_cost'])},{_fmt(agg['sd_cost'])},"
                f"{_fmt(agg['mean_violation'])},{_fmt(agg['sd_violation'])}\n"
            )
    written.append(summary_path)
    return written
