"""Solver toolkit for chance-constrained programs.

Learns a decision-to-violation-probability surface with a single-hidden-
layer network trained sequentially by recursive least squares, then finds
near-optimal probabilistically feasible decisions by randomized search.
Ships a scenario-approach baseline, a pure-sampling parallel randomized
baseline, and a seeded benchmark harness comparing all three.
"""

__version__ = "0.1.0"

from .elm import NumericalError, SlfnModel, batch_train, init_random, predict, rls_init, rls_update
from .optimize import (
    ExplorationConfig,
    InfeasibleError,
    RandomSearchConfig,
    SolveResult,
    explore_optimizer,
    parallel_randomized,
    random_search,
    scenario_sample_bound,
    scenario_solve,
)
from .problem import BoxDomain, ProblemSpec, benchmark_problem, problem_from_source
from .vmap import (
    ElmConfig,
    ReferenceGrid,
    ViolationMap,
    build_reference_grid,
    empirical_violation,
    extract_boundary,
    query_violation,
    train_violation_map,
)

__all__ = [
    "BoxDomain",
    "ElmConfig",
    "ExplorationConfig",
    "InfeasibleError",
    "NumericalError",
    "ProblemSpec",
    "RandomSearchConfig",
    "ReferenceGrid",
    "SlfnModel",
    "SolveResult",
    "ViolationMap",
    "batch_train",
    "benchmark_problem",
    "build_reference_grid",
    "empirical_violation",
    "explore_optimizer",
    "extract_boundary",
    "init_random",
    "parallel_randomized",
    "predict",
    "problem_from_source",
    "query_violation",
    "random_search",
    "rls_init",
    "rls_update",
    "scenario_sample_bound",
    "scenario_solve",
    "train_violation_map",
]
