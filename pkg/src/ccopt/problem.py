"""Chance-constrained problem instances.

A problem couples a deterministic cost with a disturbed constraint
``h(u, delta)`` that must hold (``h <= 0``) with probability at least
``1 - alpha`` over the disturbance distribution. Instances are plain
records of evaluation callbacks plus metadata, so new problems need no
solver changes. The module ships one built-in instance: a non-convex
two-dimensional benchmark on the box [-6, 5]^2 with a scalar standard
normal disturbance and alpha = 0.05.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .expressions import compile_expression

BENCHMARK_NAME = "paper-ncvx-2d"


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box of admissible decisions."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if lower.ndim != 1 or lower.shape != upper.shape or lower.size < 1:
            raise ValueError("box bounds must be 1-D arrays of equal length >= 1")
        if not np.all(np.isfinite(lower)) or not np.all(np.isfinite(upper)):
            raise ValueError("box bounds must be finite")
        if not np.all(lower < upper):
            raise ValueError("box requires lower[i] < upper[i] in every coordinate")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self):
        return int(self.lower.size)

    @property
    def widths(self):
        return self.upper - self.lower

    @property
    def center(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def half_widths(self):
        return 0.5 * (self.upper - self.lower)

    def contains(self, points, atol=0.0):
        """Boolean mask of which points lie inside the box (broadcasts)."""
        pts = np.asarray(points, dtype=float)
        return np.all((pts >= self.lower - atol) & (pts <= self.upper + atol), axis=-1)

    def normalize(self, points):
        """Map box coordinates onto the unit cube [0, 1]^n."""
        return (np.asarray(points, dtype=float) - self.lower) / self.widths

    def denormalize(self, z):
        """Inverse of :meth:`normalize`."""
        return self.lower + np.asarray(z, dtype=float) * self.widths


@dataclass(frozen=True)
class NormalSampler:
    """I.i.d. normal disturbance generator, one column per dimension."""

    mean: float = 0.0
    std: float = 1.0
    dim: int = 1

    def __call__(self, rng, count):
        return rng.normal(self.mean, self.std, size=(count, self.dim))


@dataclass(frozen=True)
class ProblemSpec:
    """A chance-constrained program.

    ``objective`` maps a decision vector to a scalar cost. ``constraint``
    maps (decision, disturbance) to a scalar; the chance constraint is
    Pr{constraint(u, delta) <= 0} >= 1 - alpha. The disturbance argument
    always carries a trailing axis of length ``disturbance_dim``; when
    ``vectorized`` is true the callbacks additionally broadcast over one
    leading batch axis of either argument.
    """

    objective: Callable
    constraint: Callable
    domain: BoxDomain
    disturbance_dim: int
    disturbance_sampler: Callable
    alpha: float
    name: str = "custom"
    vectorized: bool = False

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must lie strictly inside (0, 1)")
        if self.disturbance_dim < 1:
            raise ValueError("disturbance_dim must be >= 1")


def _check_decision(spec, u):
    u = np.asarray(u, dtype=float)
    if u.shape != (spec.domain.dim,):
        raise ValueError(f"decision must have shape ({spec.domain.dim},), got {u.shape}")
    return u


def _check_disturbance(spec, delta):
    delta = np.asarray(delta, dtype=float)
    if delta.ndim == 0:
        delta = delta.reshape(1)
    if delta.shape != (spec.disturbance_dim,):
        raise ValueError(
            f"disturbance must have shape ({spec.disturbance_dim},), got {delta.shape}"
        )
    return delta


def evaluate_cost(spec, u):
    """Deterministic cost of a single decision vector."""
    return float(spec.objective(_check_decision(spec, u)))


def evaluate_constraint(spec, u, delta):
    """Constraint value h(u, delta) for one decision and one disturbance."""
    return float(spec.constraint(_check_decision(spec, u), _check_disturbance(spec, delta)))


def sample_disturbance(spec, rng, count):
    """Draw ``count`` i.i.d. disturbance vectors, shape (count, n_delta)."""
    count = int(count)
    if count < 1:
        raise ValueError("count must be >= 1")
    out = np.asarray(spec.disturbance_sampler(rng, count), dtype=float)
    return out.reshape(count, spec.disturbance_dim)


def sample_decision_uniform(domain, rng, count):
    """Draw ``count`` decisions uniformly from the box, shape (count, n_u)."""
    count = int(count)
    if count < 1:
        raise ValueError("count must be >= 1")
    return rng.uniform(domain.lower, domain.upper, size=(count, domain.dim))


def constraint_over_disturbances(spec, u, deltas):
    """Constraint values of one decision against a batch of disturbances."""
    u = _check_decision(spec, u)
    deltas = np.asarray(deltas, dtype=float).reshape(-1, spec.disturbance_dim)
    if spec.vectorized:
        return np.asarray(spec.constraint(u, deltas), dtype=float).reshape(len(deltas))
    return np.array([spec.constraint(u, d) for d in deltas], dtype=float)


def constraint_over_decisions(spec, decisions, delta):
    """Constraint values of a batch of decisions against one disturbance."""
    decisions = np.asarray(decisions, dtype=float).reshape(-1, spec.domain.dim)
    delta = _check_disturbance(spec, delta)
    if spec.vectorized:
        return np.asarray(spec.constraint(decisions, delta), dtype=float).reshape(len(decisions))
    return np.array([spec.constraint(u, delta) for u in decisions], dtype=float)


# ---------------------------------------------------------------------------
# built-in benchmark instance


def benchmark_cost(u):
    """Separable quartic cost; broadcasts over leading axes of ``u``."""
    u = np.asarray(u, dtype=float)
    return ((u + 0.5) ** 4 - 30.0 * u**2 - 20.0 * u).sum(axis=-1) / 100.0


def benchmark_constraint(u, delta):
    """Disturbed double-well constraint; the scalar disturbance shifts both
    coordinates and modulates the threshold."""
    u = np.asarray(u, dtype=float)
    d = np.asarray(delta, dtype=float)[..., 0]
    s = u - 2.0 * d[..., None]
    wells = (0.075 * s**4 - 3.5 * s**2).sum(axis=-1)
    return wells - (8.0 - 0.1 * d) ** 2


def benchmark_problem():
    """The built-in 2-D non-convex instance ("paper-ncvx-2d")."""
    return ProblemSpec(
        objective=benchmark_cost,
        constraint=benchmark_constraint,
        domain=BoxDomain(np.array([-6.0, -6.0]), np.array([5.0, 5.0])),
        disturbance_dim=1,
        disturbance_sampler=NormalSampler(0.0, 1.0, 1),
        alpha=0.05,
        name=BENCHMARK_NAME,
        vectorized=True,
    )


BUILTIN_PROBLEMS = {BENCHMARK_NAME: benchmark_problem}


def load_problem(source):
    """Build a ProblemSpec from a JSON problem document.

    ``source`` may be a path or an already-parsed dict. The document
    declares box bounds, alpha, a disturbance spec and objective /
    constraint bodies, each either an expression string over ``u1..un``
    (plus ``d1..dm`` for the constraint) or ``{"builtin": <name>}``
    referring to a registered instance's callbacks.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source) as fh:
            doc = json.load(fh)
    else:
        doc = dict(source)

    box = doc["box"]
    domain = BoxDomain(np.asarray(box["lower"], float), np.asarray(box["upper"], float))
    alpha = float(doc["alpha"])

    dist = doc.get("disturbance", {"kind": "normal"})
    if dist.get("kind", "normal") != "normal":
        raise ValueError(f"unsupported disturbance kind {dist.get('kind')!r}")
    sampler = NormalSampler(
        float(dist.get("mean", 0.0)), float(dist.get("std", 1.0)), int(dist.get("dim", 1))
    )

    u_names = [f"u{i + 1}" for i in range(domain.dim)]
    d_names = [f"d{j + 1}" for j in range(sampler.dim)]

    def build(field, names, arity):
        body = doc[field]
        if isinstance(body, dict) and "builtin" in body:
            ref = BUILTIN_PROBLEMS[body["builtin"]]()
            return getattr(ref, field)
        text = body["expr"] if isinstance(body, dict) else body
        fn = compile_expression(text, names)
        if arity == 1:

            def objective(u, _fn=fn):
                u = np.asarray(u, dtype=float)
                env = {n: u[..., i] for i, n in enumerate(u_names)}
                return _fn(env)

            return objective

        def constraint(u, delta, _fn=fn):
            u = np.asarray(u, dtype=float)
            delta = np.asarray(delta, dtype=float)
            env = {n: u[..., i] for i, n in enumerate(u_names)}
            env.update({n: delta[..., j] for j, n in enumerate(d_names)})
            return _fn(env)

        return constraint

    return ProblemSpec(
        objective=build("objective", u_names, 1),
        constraint=build("constraint", u_names + d_names, 2),
        domain=domain,
        disturbance_dim=sampler.dim,
        disturbance_sampler=sampler,
        alpha=alpha,
        name=str(doc.get("name", "custom")),
        vectorized=True,
    )


def problem_from_source(source):
    """Resolve a problem by built-in name or JSON file path."""
    if source in BUILTIN_PROBLEMS:
        return BUILTIN_PROBLEMS[source]()
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        return load_problem(source)
    raise ValueError(
        f"unknown problem {source!r}: not a built-in name ({sorted(BUILTIN_PROBLEMS)}) "
        "and not an existing file"
    )
