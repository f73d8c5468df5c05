"""Decision-to-violation-probability surfaces.

Two routes to the probability that a decision violates the disturbed
constraint: direct Monte-Carlo estimation, and a single-hidden-layer
network trained by a two-layer sampling scheme. The scheme fixes a set
of uniform decision anchors once, then streams disturbance draws; each
draw produces a boolean violation target for every anchor and the
(anchor, target) pairs are pushed through the recursive least-squares
update in fixed anchor order. The least-squares fit of the booleans
converges to the conditional violation probability, and queries are
clipped to [0, 1].
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import elm
from .problem import (
    constraint_over_decisions,
    constraint_over_disturbances,
    evaluate_constraint,
    sample_decision_uniform,
    sample_disturbance,
)


@dataclass(frozen=True)
class ElmConfig:
    """Network settings for violation-map training."""

    hidden_count: int = 50
    activation: str = "sigmoid"
    ridge: float = 1e-6

    def __post_init__(self):
        if self.hidden_count < 1:
            raise ValueError("hidden_count must be >= 1")
        if self.ridge <= 0:
            raise ValueError("ridge must be > 0")


@dataclass(frozen=True)
class ViolationMap:
    """Trained network specialized to clipped violation-probability queries."""

    model: elm.SlfnModel
    anchors: np.ndarray
    n_delta_seen: int
    alpha_context: float

    def __post_init__(self):
        if self.model.output_dim != 1:
            raise ValueError("violation map requires a scalar-output model")
        object.__setattr__(self, "anchors", np.asarray(self.anchors, dtype=float))


def indicator(spec, u, delta):
    """1 if the constraint is strictly violated, else 0."""
    return int(evaluate_constraint(spec, u, delta) > 0.0)


def empirical_violation(spec, u, delta_samples):
    """Fraction of disturbance samples that violate the constraint at u.

    Converges to the true violation probability as the sample count grows.
    """
    deltas = np.asarray(delta_samples, dtype=float)
    if deltas.size == 0:
        raise ValueError("delta_samples must be non-empty")
    values = constraint_over_disturbances(spec, u, deltas)
    return int(np.count_nonzero(values > 0.0)) / len(values)


def train_violation_maps(spec, n_u, n_delta_list, config=None, rng=None):
    """Train maps for several disturbance budgets in one streaming pass.

    Returns {n_delta: ViolationMap}. The anchor set, hidden layer and
    disturbance stream are shared, and each requested budget is a snapshot
    of the stream after that many draws; by the stream-prefix property of
    the generator this equals training each budget separately with the
    same seed.
    """
    budgets = sorted(set(int(n) for n in n_delta_list))
    if not budgets or budgets[0] < 0:
        raise ValueError("n_delta_list must contain non-negative counts")
    n_u = int(n_u)
    if n_u < 1:
        raise ValueError("n_u must be >= 1")
    config = config or ElmConfig()
    if n_u < config.hidden_count:
        warnings.warn(
            f"n_u={n_u} anchors is below the {config.hidden_count} hidden nodes; "
            "the fitted surface may be under-determined",
            stacklevel=2,
        )

    anchors = sample_decision_uniform(spec.domain, rng, n_u)
    offset, scale = elm.scaling_for_box(spec.domain)
    model = elm.init_random(
        spec.domain.dim, config.hidden_count, 1, rng,
        activation=config.activation, input_offset=offset, input_scale=scale,
    )
    H = np.ascontiguousarray(elm.hidden_output(model, anchors))
    state = elm.rls_init(model, ridge=config.ridge)

    def snapshot(seen):
        frozen = replace(model, output_weights=state.beta.copy())
        return ViolationMap(frozen, anchors, seen, spec.alpha)

    out = {}
    if budgets[0] == 0:
        out[0] = snapshot(0)
        budgets = budgets[1:]
    if budgets:
        deltas = sample_disturbance(spec, rng, budgets[-1])
        marks = set(budgets)
        for k in range(budgets[-1]):
            targets = (constraint_over_decisions(spec, anchors, deltas[k]) > 0.0)
            elm.rls_sweep(state, H, targets.astype(float)[:, None])
            if k + 1 in marks:
                out[k + 1] = snapshot(k + 1)
    return out


def train_violation_map(spec, n_u, n_delta, config=None, rng=None):
    """Train one map with ``n_delta`` streamed disturbance draws."""
    return train_violation_maps(spec, n_u, [int(n_delta)], config, rng)[int(n_delta)]


def query_violation(vmap, u):
    """Predicted violation probability at u, clipped to [0, 1]."""
    return float(np.clip(elm.predict(vmap.model, u)[0], 0.0, 1.0))


def query_violation_batch(vmap, decisions):
    """Clipped predictions for a batch of decisions, shape (N,)."""
    return np.clip(elm.predict_batch(vmap.model, decisions)[:, 0], 0.0, 1.0)


# ---------------------------------------------------------------------------
# lattice grids and level-set boundaries


@dataclass(frozen=True)
class ReferenceGrid:
    """Values on a regular lattice over the box.

    Monte-Carlo reference grids record the per-point sample count and the
    base seed; model-evaluated grids use ``n_delta == 0`` and ``seed == -1``.
    """

    axes: tuple
    values: np.ndarray
    n_delta: int
    seed: int

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        values = np.asarray(self.values, dtype=float)
        if values.shape != tuple(len(a) for a in axes):
            raise ValueError("values shape must match the per-axis point counts")
        if values.size and (values.min() < 0.0 or values.max() > 1.0):
            raise ValueError("grid values must lie in [0, 1]")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", values)

    @property
    def dim(self):
        return len(self.axes)

    @property
    def per_axis(self):
        return tuple(len(a) for a in self.axes)

    @property
    def points(self):
        """Lattice points in row-major order, shape (prod(per_axis), dim)."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


def build_reference_grid(spec, per_axis, n_delta, seed):
    """Monte-Carlo violation estimates on a regular lattice.

    Point j uses the sub-stream seeded with ``seed ^ j`` so the grid can be
    evaluated in any order (or in parallel) with identical results.
    """
    per_axis = tuple(int(c) for c in per_axis)
    if len(per_axis) != spec.domain.dim or any(c < 2 for c in per_axis):
        raise ValueError("per_axis needs one count >= 2 per box dimension")
    n_delta = int(n_delta)
    if n_delta < 1:
        raise ValueError("n_delta must be >= 1")
    seed = int(seed)
    axes = tuple(
        np.linspace(spec.domain.lower[i], spec.domain.upper[i], per_axis[i])
        for i in range(spec.domain.dim)
    )
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=-1)
    values = np.empty(len(points))
    for j, point in enumerate(points):
        sub = np.random.default_rng(seed ^ j)
        values[j] = empirical_violation(spec, point, sample_disturbance(spec, sub, n_delta))
    return ReferenceGrid(axes, values.reshape(per_axis), n_delta, seed)


def grid_from_map(vmap, axes):
    """Evaluate a trained map on an existing lattice."""
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=-1)
    values = query_violation_batch(vmap, points).reshape([len(a) for a in axes])
    return ReferenceGrid(axes, values, 0, -1)


def extract_boundary(grid, level):
    """Level-crossing points of a lattice grid, shape (K, dim).

    Scans every lattice edge; edges whose endpoint values strictly straddle
    ``level`` contribute one linearly interpolated point. Points are emitted
    axis by axis in row-major edge order. May be empty.
    """
    if not (0.0 < level < 1.0):
        raise ValueError("level must lie strictly inside (0, 1)")
    values = grid.values
    mesh = np.meshgrid(*grid.axes, indexing="ij")
    points = []
    for axis in range(grid.dim):
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        v0 = values[tuple(lo)]
        v1 = values[tuple(hi)]
        straddle = (v0 - level) * (v1 - level) < 0.0
        if not straddle.any():
            continue
        frac = (level - v0[straddle]) / (v1[straddle] - v0[straddle])
        coords = []
        for c in range(grid.dim):
            p0 = mesh[c][tuple(lo)][straddle]
            if c == axis:
                p1 = mesh[c][tuple(hi)][straddle]
                coords.append(p0 + frac * (p1 - p0))
            else:
                coords.append(p0)
        points.append(np.stack(coords, axis=-1))
    if not points:
        return np.empty((0, grid.dim))
    return np.concatenate(points, axis=0)


def chamfer_one_sided(from_points, to_points):
    """Mean distance from each source point to its nearest target point."""
    from_points = np.asarray(from_points, dtype=float)
    to_points = np.asarray(to_points, dtype=float)
    if len(from_points) == 0:
        return 0.0
    if len(to_points) == 0:
        return float("inf")
    d2 = ((from_points[:, None, :] - to_points[None, :, :]) ** 2).sum(axis=-1)
    return float(np.sqrt(d2.min(axis=1)).mean())


def map_mae(vmap, grid):
    """Mean absolute error of map queries against a grid's values."""
    return float(np.abs(query_violation_batch(vmap, grid.points) - grid.values.ravel()).mean())


def holdout_mae(spec, vmap, n_points, n_delta, rng):
    """MAE of the map against fresh Monte-Carlo estimates at uniform probes."""
    probes = sample_decision_uniform(spec.domain, rng, n_points)
    estimates = np.array([
        empirical_violation(spec, p, sample_disturbance(spec, rng, n_delta)) for p in probes
    ])
    return float(np.abs(query_violation_batch(vmap, probes) - estimates).mean())


# ---------------------------------------------------------------------------
# export and persistence

MAP_FORMAT = "violation-map"
MAP_VERSION = 1


def export_grid_csv(grid, path):
    """Grid CSV: header u1,u2,v then row-major rows, 9 significant digits."""
    if grid.dim != 2:
        raise ValueError("grid CSV export is defined for 2-D lattices")
    with open(path, "w", newline="") as fh:
        fh.write("u1,u2,v\n")
        for point, value in zip(grid.points, grid.values.ravel()):
            fh.write(f"{point[0]:.9g},{point[1]:.9g},{value:.9g}\n")


def export_boundary_csv(points, path):
    """Boundary polyline CSV: header u1,u2 then one point per row."""
    points = np.asarray(points, dtype=float)
    with open(path, "w", newline="") as fh:
        fh.write("u1,u2\n")
        for p in points:
            fh.write(f"{p[0]:.9g},{p[1]:.9g}\n")


def map_to_doc(vmap):
    return {
        "format": MAP_FORMAT,
        "version": MAP_VERSION,
        "model": elm.model_to_doc(vmap.model),
        "anchors": vmap.anchors.tolist(),
        "n_delta_seen": int(vmap.n_delta_seen),
        "alpha_context": float(vmap.alpha_context),
    }


def map_from_doc(doc):
    if doc.get("format") != MAP_FORMAT:
        raise ValueError(f"not a {MAP_FORMAT} document")
    if doc.get("version") != MAP_VERSION:
        raise ValueError(f"unsupported map version {doc.get('version')!r}")
    return ViolationMap(
        model=elm.model_from_doc(doc["model"]),
        anchors=np.asarray(doc["anchors"], dtype=float),
        n_delta_seen=int(doc["n_delta_seen"]),
        alpha_context=float(doc["alpha_context"]),
    )


def save_map(vmap, path):
    elm.dump_canonical_json(map_to_doc(vmap), path)


def load_map(path):
    with open(path) as fh:
        return map_from_doc(json.load(fh))
