"""Randomized solvers for chance-constrained programs.

Four strategies share one result record:

* ``random_search`` - derivative-free local search under an arbitrary
  feasibility predicate; accepts only strict cost improvements.
* ``explore_optimizer`` - batch candidate search filtered by a trained
  violation-probability map, with a conservatism margin subtracted from
  the admissible level to absorb map error.
* ``parallel_randomized`` - pure-sampling baseline that re-estimates each
  candidate's violation probability from fresh disturbance draws.
* ``scenario_solve`` - replaces the chance constraint with finitely many
  sampled constraints and solves the resulting program by multi-start
  random search; ``scenario_sample_bound`` gives the sample-size lower
  bound for a requested confidence.

Every solver reports a post-hoc violation estimate for its final decision
from fresh Monte-Carlo samples, independent of how the method itself
filtered candidates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .problem import (
    constraint_over_disturbances,
    sample_decision_uniform,
    sample_disturbance,
)
from .vmap import empirical_violation, query_violation_batch

DEFAULT_ORACLE_SAMPLES = 10_000


class InfeasibleError(RuntimeError):
    """No feasible point was found within the configured budget."""


@dataclass(frozen=True)
class RandomSearchConfig:
    """Local random-search settings.

    ``neighborhood_radius`` is the squared-distance threshold defining the
    proposal neighborhood in normalized (unit-cube) box coordinates.
    ``init_draws`` uniform candidates are always evaluated to pick the
    starting point, keeping the constraint-evaluation count a function of
    the configuration alone.
    """

    neighborhood_radius: float = 0.01
    proposal: str = "uniform-ball"
    max_iterations: int = 1000
    global_restart_probability: float = 0.0
    init_draws: int = 16

    def __post_init__(self):
        if self.neighborhood_radius <= 0:
            raise ValueError("neighborhood_radius must be > 0")
        if self.proposal not in ("uniform-ball", "normal"):
            raise ValueError("proposal must be 'uniform-ball' or 'normal'")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not (0.0 <= self.global_restart_probability <= 1.0):
            raise ValueError("global_restart_probability must lie in [0, 1]")
        if self.init_draws < 1:
            raise ValueError("init_draws must be >= 1")


def default_search_config(dim, **overrides):
    """Search defaults for map-guided exploration: neighborhood radius a
    tenth of the normalized box diagonal."""
    radius = 0.1 * math.sqrt(dim)
    cfg = {"neighborhood_radius": radius * radius}
    cfg.update(overrides)
    return RandomSearchConfig(**cfg)


@dataclass(frozen=True)
class ExplorationConfig:
    """Map-guided exploration settings.

    Candidates whose mapped violation probability exceeds
    ``alpha - alpha_margin`` are discarded; the margin compensates for map
    approximation error. Per iteration, each of the ``batch_size``
    candidates is a global uniform draw with probability ``p_global`` and
    otherwise a draw in the incumbent's neighborhood, whose squared radius
    decays geometrically by ``radius_decay``.
    """

    alpha: float
    batch_size: int = 50
    alpha_margin: float = 0.005
    iterations: int = 100
    search: RandomSearchConfig | None = None
    p_global: float = 0.3
    radius_decay: float = 0.995
    reset_on_empty: bool = False

    def __post_init__(self):
        if not (0.0 <= self.alpha_margin < self.alpha < 1.0):
            raise ValueError("need 0 <= alpha_margin < alpha < 1")
        if self.batch_size < 1 or self.iterations < 1:
            raise ValueError("batch_size and iterations must be >= 1")
        if not (0.0 <= self.p_global <= 1.0):
            raise ValueError("p_global must lie in [0, 1]")
        if not (0.0 < self.radius_decay <= 1.0):
            raise ValueError("radius_decay must lie in (0, 1]")


@dataclass(frozen=True)
class SolveResult:
    """Outcome of one solver run.

    ``trajectory_u``/``trajectory_cost`` hold the incumbent after the
    initial draw and after each iteration; costs are non-increasing.
    ``oracle_violation`` is the fresh-sample Monte-Carlo estimate at the
    final decision (NaN when the solver has no disturbance model, as in
    bare random search). Evaluation counts cover every constraint and
    objective call the run made.
    """

    method: str
    u: np.ndarray
    cost: float
    trajectory_u: np.ndarray
    trajectory_cost: np.ndarray
    oracle_violation: float = float("nan")
    seed: int | None = None
    feasible_found: bool = True
    n_constraint_evals: int = 0
    n_objective_evals: int = 0
    n_map_queries: int = 0
    config: dict = field(default_factory=dict)
    scenarios: np.ndarray | None = None


def solve_result_to_dict(result):
    """JSON-ready rendering of a result (arrays become nested lists)."""
    doc = {
        "method": result.method,
        "u": np.asarray(result.u, dtype=float).tolist(),
        "cost": float(result.cost),
        "trajectory_u": np.asarray(result.trajectory_u, dtype=float).tolist(),
        "trajectory_cost": np.asarray(result.trajectory_cost, dtype=float).tolist(),
        "oracle_violation": float(result.oracle_violation),
        "seed": result.seed,
        "feasible_found": bool(result.feasible_found),
        "n_constraint_evals": int(result.n_constraint_evals),
        "n_objective_evals": int(result.n_objective_evals),
        "n_map_queries": int(result.n_map_queries),
        "config": result.config,
    }
    if result.scenarios is not None:
        doc["scenarios"] = np.asarray(result.scenarios, dtype=float).tolist()
    return doc


def oracle_violation(spec, u, rng, n_samples=DEFAULT_ORACLE_SAMPLES):
    """Method-independent referee: fresh-sample violation estimate at u."""
    return empirical_violation(spec, u, sample_disturbance(spec, rng, n_samples))


def _propose_near(z, cfg, radius_sq, rng):
    """One proposal inside the squared-radius neighborhood of z, clipped to
    the unit cube (clipping cannot leave the neighborhood)."""
    dim = z.size
    radius = math.sqrt(radius_sq)
    if cfg.proposal == "uniform-ball":
        direction = rng.normal(size=dim)
        norm = np.linalg.norm(direction)
        if norm == 0.0:
            return z.copy()
        step = direction / norm * radius * rng.uniform() ** (1.0 / dim)
    else:
        step = rng.normal(scale=0.5 * radius, size=dim)
        norm = np.linalg.norm(step)
        if norm >= radius:
            step *= (0.999 * radius) / norm
    return np.clip(z + step, 0.0, 1.0)


def random_search(objective, feasible, domain, cfg=None, rng=None, method="random-search",
                  seed=None):
    """Derivative-free local search over the box (strict-improvement accept).

    Starts from the first feasible point among ``cfg.init_draws`` uniform
    candidates (all are evaluated), then repeatedly proposes a point in the
    incumbent's neighborhood (or, with the configured probability, a global
    uniform draw) and accepts it only when feasible and strictly cheaper.
    Raises InfeasibleError when no starting point is found.
    """
    cfg = cfg or RandomSearchConfig()
    n_feas = 0
    n_obj = 0

    starts = sample_decision_uniform(domain, rng, cfg.init_draws)
    incumbent = None
    for candidate in starts:
        ok = bool(feasible(candidate))
        n_feas += 1
        if ok and incumbent is None:
            incumbent = candidate
    if incumbent is None:
        raise InfeasibleError(
            f"no feasible starting point among {cfg.init_draws} uniform draws"
        )

    best_cost = float(objective(incumbent))
    n_obj += 1
    z = domain.normalize(incumbent)
    traj_u = [incumbent.copy()]
    traj_c = [best_cost]

    for _ in range(cfg.max_iterations):
        if cfg.global_restart_probability > 0 and rng.uniform() < cfg.global_restart_probability:
            z_new = rng.uniform(size=domain.dim)
        else:
            z_new = _propose_near(z, cfg, cfg.neighborhood_radius, rng)
        candidate = domain.denormalize(z_new)
        n_feas += 1
        if feasible(candidate):
            cost = float(objective(candidate))
            n_obj += 1
            if cost < best_cost:
                incumbent, best_cost, z = candidate, cost, z_new
        traj_u.append(incumbent.copy())
        traj_c.append(best_cost)

    return SolveResult(
        method=method,
        u=incumbent,
        cost=best_cost,
        trajectory_u=np.asarray(traj_u),
        trajectory_cost=np.asarray(traj_c),
        seed=seed,
        feasible_found=True,
        n_constraint_evals=n_feas,
        n_objective_evals=n_obj,
        config={
            "neighborhood_radius": cfg.neighborhood_radius,
            "proposal": cfg.proposal,
            "max_iterations": cfg.max_iterations,
            "global_restart_probability": cfg.global_restart_probability,
            "init_draws": cfg.init_draws,
        },
    )


def explore_optimizer(spec, violation_map, cfg, rng, seed=None,
                      oracle_samples=DEFAULT_ORACLE_SAMPLES):
    """Search for the cheapest decision the trained map deems feasible.

    Each iteration draws a candidate batch, keeps those whose mapped
    violation probability is at most alpha - alpha_margin, and moves the
    incumbent to the cheapest survivor when it strictly improves. An empty
    survivor set normally just skips the iteration; ``reset_on_empty``
    re-randomizes the incumbent instead (which forfeits monotonicity).
    """
    domain = spec.domain
    if violation_map.model.input_dim != domain.dim:
        raise ValueError(
            f"map expects {violation_map.model.input_dim}-dim decisions, "
            f"problem domain is {domain.dim}-dim"
        )
    search = cfg.search or default_search_config(domain.dim)
    threshold = cfg.alpha - cfg.alpha_margin

    incumbent = sample_decision_uniform(domain, rng, 1)[0]
    best_cost = float(spec.objective(incumbent))
    n_obj = 1
    n_queries = 0
    feasible_found = False
    z = domain.normalize(incumbent)
    radius_sq = search.neighborhood_radius
    traj_u = [incumbent.copy()]
    traj_c = [best_cost]

    for _ in range(cfg.iterations):
        candidates = np.empty((cfg.batch_size, domain.dim))
        for c in range(cfg.batch_size):
            if rng.uniform() < cfg.p_global:
                candidates[c] = domain.denormalize(rng.uniform(size=domain.dim))
            else:
                candidates[c] = domain.denormalize(_propose_near(z, search, radius_sq, rng))
        predicted = query_violation_batch(violation_map, candidates)
        n_queries += cfg.batch_size
        survivors = np.flatnonzero(predicted <= threshold)
        if survivors.size:
            feasible_found = True
            costs = np.array([float(spec.objective(candidates[i])) for i in survivors])
            n_obj += survivors.size
            best = int(np.argmin(costs))  # ties break to the earliest draw
            if costs[best] < best_cost:
                incumbent = candidates[survivors[best]]
                best_cost = float(costs[best])
                z = domain.normalize(incumbent)
        elif cfg.reset_on_empty:
            incumbent = sample_decision_uniform(domain, rng, 1)[0]
            best_cost = float(spec.objective(incumbent))
            n_obj += 1
            z = domain.normalize(incumbent)
        traj_u.append(incumbent.copy())
        traj_c.append(best_cost)
        radius_sq *= cfg.radius_decay

    return SolveResult(
        method="proposed",
        u=incumbent,
        cost=best_cost,
        trajectory_u=np.asarray(traj_u),
        trajectory_cost=np.asarray(traj_c),
        oracle_violation=oracle_violation(spec, incumbent, rng, oracle_samples),
        seed=seed,
        feasible_found=feasible_found,
        n_constraint_evals=0,
        n_objective_evals=n_obj,
        n_map_queries=n_queries,
        config={
            "alpha": cfg.alpha,
            "alpha_margin": cfg.alpha_margin,
            "batch_size": cfg.batch_size,
            "iterations": cfg.iterations,
            "p_global": cfg.p_global,
            "radius_decay": cfg.radius_decay,
            "neighborhood_radius": search.neighborhood_radius,
            "oracle_samples": oracle_samples,
        },
    )


def parallel_randomized(spec, n_u, n_delta, iterations, rng, alpha=None, seed=None,
                        oracle_samples=DEFAULT_ORACLE_SAMPLES):
    """Pure-sampling baseline.

    Each iteration draws ``n_u`` uniform candidates and ``n_delta`` fresh
    disturbances, estimates every candidate's violation probability from
    that shared batch, discards estimates above alpha, and keeps the
    cheapest survivor when it strictly improves the incumbent.
    """
    n_u, n_delta, iterations = int(n_u), int(n_delta), int(iterations)
    if min(n_u, n_delta, iterations) < 1:
        raise ValueError("n_u, n_delta and iterations must all be >= 1")
    alpha = spec.alpha if alpha is None else float(alpha)

    incumbent = sample_decision_uniform(spec.domain, rng, 1)[0]
    best_cost = float(spec.objective(incumbent))
    n_obj = 1
    n_cons = 0
    feasible_found = False
    traj_u = [incumbent.copy()]
    traj_c = [best_cost]

    for _ in range(iterations):
        candidates = sample_decision_uniform(spec.domain, rng, n_u)
        deltas = sample_disturbance(spec, rng, n_delta)
        estimates = np.array([
            np.count_nonzero(constraint_over_disturbances(spec, u, deltas) > 0.0) / n_delta
            for u in candidates
        ])
        n_cons += n_u * n_delta
        survivors = np.flatnonzero(estimates <= alpha)
        if survivors.size:
            feasible_found = True
            costs = np.array([float(spec.objective(candidates[i])) for i in survivors])
            n_obj += survivors.size
            best = int(np.argmin(costs))
            if costs[best] < best_cost:
                incumbent = candidates[survivors[best]]
                best_cost = float(costs[best])
        traj_u.append(incumbent.copy())
        traj_c.append(best_cost)

    return SolveResult(
        method="parallel",
        u=incumbent,
        cost=best_cost,
        trajectory_u=np.asarray(traj_u),
        trajectory_cost=np.asarray(traj_c),
        oracle_violation=oracle_violation(spec, incumbent, rng, oracle_samples),
        seed=seed,
        feasible_found=feasible_found,
        n_constraint_evals=n_cons,
        n_objective_evals=n_obj,
        config={
            "alpha": alpha,
            "n_u": n_u,
            "n_delta": n_delta,
            "iterations": iterations,
            "oracle_samples": oracle_samples,
        },
    )


def scenario_sample_bound(alpha, beta_conf, n_u):
    """Smallest scenario count guaranteeing, with confidence 1 - beta_conf,
    that the sampled program's solution violates at most alpha:
    ceil((2/alpha) ln(1/beta) + 2 n_u + (2 n_u / alpha) ln(2/alpha))."""
    alpha = float(alpha)
    beta_conf = float(beta_conf)
    n_u = int(n_u)
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie strictly inside (0, 1)")
    if not (0.0 < beta_conf <= 1.0):
        raise ValueError("beta_conf must lie in (0, 1]")
    if n_u < 1:
        raise ValueError("n_u must be >= 1")
    value = (2.0 / alpha) * math.log(1.0 / beta_conf) + 2.0 * n_u \
        + (2.0 * n_u / alpha) * math.log(2.0 / alpha)
    return int(math.ceil(value))


def scenario_solve(spec, n_scenarios, search=None, rng=None, restarts=10, seed=None,
                   oracle_samples=DEFAULT_ORACLE_SAMPLES):
    """Solve the sampled-constraint program by multi-start random search.

    Draws the scenario set once; a decision is feasible when the constraint
    holds for every scenario. Returns the best result across restarts with
    the scenario set recorded for audit. Raises InfeasibleError when no
    restart finds a feasible point.
    """
    n_scenarios = int(n_scenarios)
    if n_scenarios < 1:
        raise ValueError("n_scenarios must be >= 1")
    search = search or RandomSearchConfig()
    restarts = int(restarts)
    if restarts < 1:
        raise ValueError("restarts must be >= 1")

    scenarios = sample_disturbance(spec, rng, n_scenarios)
    calls = 0

    def feasible(u):
        nonlocal calls
        calls += 1
        return float(np.max(constraint_over_disturbances(spec, u, scenarios))) <= 0.0

    best = None
    n_obj = 0
    for _ in range(restarts):
        try:
            result = random_search(spec.objective, feasible, spec.domain, search, rng)
        except InfeasibleError:
            continue
        n_obj += result.n_objective_evals
        if best is None or result.cost < best.cost:
            best = result
    if best is None:
        raise InfeasibleError(
            f"no scenario-feasible point found across {restarts} restarts"
        )

    return replace(
        best,
        method="scenario",
        oracle_violation=oracle_violation(spec, best.u, rng, oracle_samples),
        seed=seed,
        n_constraint_evals=calls * n_scenarios,
        n_objective_evals=n_obj,
        config={
            "n_scenarios": n_scenarios,
            "restarts": restarts,
            "max_iterations": search.max_iterations,
            "init_draws": search.init_draws,
            "neighborhood_radius": search.neighborhood_radius,
            "global_restart_probability": search.global_restart_probability,
            "oracle_samples": oracle_samples,
        },
        scenarios=scenarios,
    )
