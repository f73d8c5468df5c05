"""Command-line interface.

Subcommands bind problems, map training, solving and benchmarking into
reproducible invocations: every run is fully determined by the subcommand,
the resolved configuration and the seed, and every output embeds both the
configuration and the seed. Exit codes: 0 success, 1 numerical/runtime
failure, 2 usage error, 3 infeasible.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import bench
from .elm import NumericalError
from .optimize import (
    ExplorationConfig,
    InfeasibleError,
    RandomSearchConfig,
    default_search_config,
    explore_optimizer,
    parallel_randomized,
    scenario_solve,
    solve_result_to_dict,
)
from .problem import problem_from_source
from .vmap import ElmConfig, holdout_mae, load_map, save_map, train_violation_map

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3


class UsageError(ValueError):
    pass


def _positive(name, value, minimum=1):
    if value is None or value < minimum:
        raise UsageError(f"--{name} must be >= {minimum}")
    return value


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ccopt",
        description="Chance-constrained program solver toolkit",
    )
    parser.add_argument("--config", help="JSON file of flag defaults (flags override)")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem", "-p", default="paper-ncvx-2d",
                        help="built-in problem name or JSON problem file")
    common.add_argument("--seed", type=int, default=0, help="base seed (all randomness)")

    tm = sub.add_parser("train-map", parents=[common],
                        help="train and persist a violation-probability map")
    tm.add_argument("--n-u", type=int, default=400, help="decision anchor count")
    tm.add_argument("--n-delta", type=int, default=1000, help="disturbance sample budget")
    tm.add_argument("--hidden", type=int, default=50, help="hidden node count")
    tm.add_argument("--activation", default="sigmoid",
                    choices=("sigmoid", "tanh", "gaussian"))
    tm.add_argument("--ridge", type=float, default=1e-6)
    tm.add_argument("--out", default="violation-map.json", help="model file to write")
    tm.add_argument("--holdout-points", type=int, default=200)
    tm.add_argument("--holdout-n-delta", type=int, default=2000)

    sv = sub.add_parser("solve", parents=[common], help="run one solver")
    sv.add_argument("--method", required=True,
                    choices=("proposed", "parallel", "scenario"))
    sv.add_argument("--out", help="write the result JSON here (default: stdout only)")
    sv.add_argument("--alpha", type=float, help="override the problem's violation level")
    sv.add_argument("--oracle-n", type=int, default=10000,
                    help="fresh samples for the post-hoc violation estimate")
    sv.add_argument("--map", help="trained map file (proposed)")
    sv.add_argument("--train-n-u", type=int, default=400,
                    help="anchors for inline map training (proposed, no --map)")
    sv.add_argument("--train-n-delta", type=int, default=2000,
                    help="disturbance budget for inline map training")
    sv.add_argument("--hidden", type=int, default=50)
    sv.add_argument("--alpha-eps", type=float, default=0.005,
                    help="conservatism margin subtracted from alpha (proposed)")
    sv.add_argument("--iterations", type=int, default=100)
    sv.add_argument("--batch", type=int, default=50,
                    help="candidates per iteration (proposed)")
    sv.add_argument("--p-global", type=float, default=0.3)
    sv.add_argument("--eps-v", type=float,
                    help="squared neighborhood radius in normalized coordinates")
    sv.add_argument("--radius-decay", type=float, default=0.995)
    sv.add_argument("--n-u", type=int, default=50,
                    help="candidates per iteration (parallel)")
    sv.add_argument("--n-delta", type=int, default=2000,
                    help="fresh disturbance samples per iteration (parallel)")
    sv.add_argument("--scenarios", type=int, default=2000,
                    help="scenario count (scenario)")
    sv.add_argument("--restarts", type=int, default=10)
    sv.add_argument("--init-draws", type=int, default=16)

    bm = sub.add_parser("benchmark", parents=[common], help="run the full harness")
    bm.add_argument("--out-dir", default="bench-out")
    bm.add_argument("--runs", type=int, default=20)
    bm.add_argument("--workers", type=int, default=1)
    bm.add_argument("--skip-map-study", action="store_true")
    bm.add_argument("--skip-solvers", action="store_true")
    bm.add_argument("--map-n-u", type=int, default=400)
    bm.add_argument("--n-delta-list", type=int, nargs="+", default=[200, 1000, 2000])
    bm.add_argument("--hidden", type=int, default=50)
    bm.add_argument("--ref-per-axis", type=int, nargs=2, default=[56, 56])
    bm.add_argument("--ref-n-delta", type=int, default=10000)
    bm.add_argument("--solve-n-delta", type=int, default=2000)
    bm.add_argument("--explore-iterations", type=int, default=100)
    bm.add_argument("--explore-batch", type=int, default=50)
    bm.add_argument("--alpha-eps", type=float, default=0.005)
    bm.add_argument("--parallel-n-u", type=int, default=50)
    bm.add_argument("--parallel-iterations", type=int, default=8)
    bm.add_argument("--scenarios", type=int, default=2000)
    bm.add_argument("--scenario-restarts", type=int, default=4)
    bm.add_argument("--scenario-iterations", type=int, default=92)
    bm.add_argument("--oracle-n", type=int, default=10000)
    return parser


def cmd_train_map(args):
    _positive("n-u", args.n_u)
    _positive("n-delta", args.n_delta)
    _positive("hidden", args.hidden)
    spec = problem_from_source(args.problem)
    rng = np.random.default_rng(args.seed)
    config = ElmConfig(args.hidden, args.activation, args.ridge)
    trained = train_violation_map(spec, args.n_u, args.n_delta, config, rng)
    save_map(trained, args.out)
    mae = holdout_mae(spec, trained, args.holdout_points, args.holdout_n_delta, rng)
    print(f"n_u={args.n_u} n_delta={args.n_delta} hidden={args.hidden} seed={args.seed}")
    print(f"holdout_mae={mae:.6f} "
          f"({args.holdout_points} probes x {args.holdout_n_delta} samples)")
    print(f"saved: {args.out}")
    return EXIT_OK


def cmd_solve(args):
    spec = problem_from_source(args.problem)
    alpha = spec.alpha if args.alpha is None else args.alpha
    rng = np.random.default_rng(args.seed)
    _positive("iterations", args.iterations)

    if args.method == "proposed":
        if args.map:
            trained = load_map(args.map)
        else:
            _positive("train-n-delta", args.train_n_delta)
            trained = train_violation_map(
                spec, args.train_n_u, args.train_n_delta, ElmConfig(args.hidden), rng
            )
        search = (default_search_config(spec.domain.dim)
                  if args.eps_v is None
                  else default_search_config(spec.domain.dim,
                                             neighborhood_radius=args.eps_v))
        cfg = ExplorationConfig(
            alpha=alpha,
            batch_size=_positive("batch", args.batch),
            alpha_margin=args.alpha_eps,
            iterations=args.iterations,
            search=search,
            p_global=args.p_global,
            radius_decay=args.radius_decay,
        )
        result = explore_optimizer(spec, trained, cfg, rng, seed=args.seed,
                                   oracle_samples=args.oracle_n)
    elif args.method == "parallel":
        result = parallel_randomized(
            spec, _positive("n-u", args.n_u), _positive("n-delta", args.n_delta),
            args.iterations, rng, alpha=alpha, seed=args.seed,
            oracle_samples=args.oracle_n,
        )
    else:
        search = RandomSearchConfig(
            max_iterations=args.iterations,
            init_draws=_positive("init-draws", args.init_draws),
        )
        result = scenario_solve(
            spec, _positive("scenarios", args.scenarios), search, rng,
            restarts=_positive("restarts", args.restarts), seed=args.seed,
            oracle_samples=args.oracle_n,
        )

    doc = solve_result_to_dict(result)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    u_text = " ".join(f"{x:.6g}" for x in result.u)
    print(f"method={result.method} u*=[{u_text}] cost={result.cost:.6g} "
          f"oracle_violation={result.oracle_violation:.6g}")
    if not result.feasible_found:
        print("warning: no feasible candidate found; returning the initial point")
    return EXIT_OK


def cmd_benchmark(args):
    _positive("runs", args.runs)
    _positive("workers", args.workers)
    cfg = bench.ExperimentConfig(
        problem=args.problem,
        output_dir=args.out_dir,
        base_seed=args.seed,
        workers=args.workers,
        map_n_u=args.map_n_u,
        n_delta_list=tuple(args.n_delta_list),
        hidden_count=args.hidden,
        ref_per_axis=tuple(args.ref_per_axis),
        ref_n_delta=args.ref_n_delta,
        run_count=args.runs,
        solve_n_delta=args.solve_n_delta,
        explore_iterations=args.explore_iterations,
        explore_batch=args.explore_batch,
        alpha_margin=args.alpha_eps,
        parallel_n_u=args.parallel_n_u,
        parallel_iterations=args.parallel_iterations,
        scenario_count=args.scenarios,
        scenario_restarts=args.scenario_restarts,
        scenario_iterations=args.scenario_iterations,
        oracle_samples=args.oracle_n,
    )
    report = bench.run_benchmark(
        cfg, do_map_study=not args.skip_map_study, do_solvers=not args.skip_solvers
    )
    for row in report.map_accuracy:
        print(f"map n_delta={row['n_delta']}: mae={row['mae']:.4f} "
              f"boundary_dev={row['boundary_deviation']:.4f}")
    for method in sorted(report.aggregates):
        agg = report.aggregates[method]
        if agg["mean_cost"] is None:
            print(f"{method}: all {cfg.run_count} runs failed")
            continue
        print(f"{method}: mean_cost={agg['mean_cost']:.4f} "
              f"mean_violation={agg['mean_violation']:.4f} "
              f"sd_violation={agg['sd_violation']:.4f} failures={agg['failures']}")
    print(f"report: {cfg.output_dir}/report.json")
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        preliminary, _ = parser.parse_known_args(argv)
        if preliminary.config:
            with open(preliminary.config) as fh:
                parser.set_defaults(**json.load(fh))
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE

    handlers = {
        "train-map": cmd_train_map,
        "solve": cmd_solve,
        "benchmark": cmd_benchmark,
    }
    try:
        return handlers[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (NumericalError, np.linalg.LinAlgError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entry():
    raise SystemExit(main())


if __name__ == "__main__":
    sys.exit(main())
