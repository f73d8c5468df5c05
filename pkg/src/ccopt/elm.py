"""Single-hidden-layer networks with randomly fixed hidden weights.

Output weights are fit either in one shot from the pseudoinverse of the
hidden-layer output matrix or sequentially by recursive least squares,
which lets the violation-probability map stream disturbance samples one
at a time. Hidden weights and biases are never trained.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False


class NumericalError(RuntimeError):
    """Linear-algebra failure that regularization did not prevent."""


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500.0, 500.0)))


def _gaussian(z):
    return np.exp(-np.square(z))


# every entry must be infinitely differentiable on the real line
ACTIVATIONS = {
    "sigmoid": _sigmoid,
    "tanh": np.tanh,
    "gaussian": _gaussian,
}


@dataclass(frozen=True)
class SlfnModel:
    """Single-hidden-layer network: out(x) = g(scale(x) W^T + b) beta.

    ``input_offset``/``input_scale`` hold the affine input scaling applied
    before the hidden layer; models built for a box domain map it onto
    [-1, 1]^n so pre-activations stay in the responsive range of ``g``.
    """

    input_dim: int
    hidden_count: int
    output_dim: int
    hidden_weights: np.ndarray
    hidden_biases: np.ndarray
    output_weights: np.ndarray
    activation: str = "sigmoid"
    input_offset: np.ndarray = None
    input_scale: np.ndarray = None

    def __post_init__(self):
        n, nb, m = self.input_dim, self.hidden_count, self.output_dim
        if min(n, nb, m) < 1:
            raise ValueError("all dimensions must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        w = np.asarray(self.hidden_weights, dtype=float)
        b = np.asarray(self.hidden_biases, dtype=float)
        beta = np.asarray(self.output_weights, dtype=float)
        if w.shape != (nb, n) or b.shape != (nb,) or beta.shape != (nb, m):
            raise ValueError("weight array shapes do not match the declared dimensions")
        off = np.zeros(n) if self.input_offset is None else np.asarray(self.input_offset, float)
        sc = np.ones(n) if self.input_scale is None else np.asarray(self.input_scale, float)
        if off.shape != (n,) or sc.shape != (n,):
            raise ValueError("input scaling arrays must have shape (input_dim,)")
        for arr in (w, b, beta, off, sc):
            if not np.all(np.isfinite(arr)):
                raise ValueError("model parameters must be finite")
        object.__setattr__(self, "hidden_weights", w)
        object.__setattr__(self, "hidden_biases", b)
        object.__setattr__(self, "output_weights", beta)
        object.__setattr__(self, "input_offset", off)
        object.__setattr__(self, "input_scale", sc)


def scaling_for_box(domain):
    """Affine parameters mapping a box onto [-1, 1]^n."""
    return domain.center, domain.half_widths


def init_random(input_dim, hidden_count, output_dim, rng, activation="sigmoid",
                input_offset=None, input_scale=None):
    """Model with hidden weights and biases i.i.d. uniform on [-1, 1] and
    zero output weights. Weights are drawn before biases."""
    if min(int(input_dim), int(hidden_count), int(output_dim)) < 1:
        raise ValueError("all dimensions must be >= 1")
    weights = rng.uniform(-1.0, 1.0, size=(hidden_count, input_dim))
    biases = rng.uniform(-1.0, 1.0, size=hidden_count)
    return SlfnModel(
        input_dim=int(input_dim),
        hidden_count=int(hidden_count),
        output_dim=int(output_dim),
        hidden_weights=weights,
        hidden_biases=biases,
        output_weights=np.zeros((hidden_count, output_dim)),
        activation=activation,
        input_offset=input_offset,
        input_scale=input_scale,
    )


def hidden_output(model, inputs):
    """Hidden-layer output matrix H, shape (N, hidden_count);
    H[i, j] = g(w_j . x_i + b_j) on the scaled inputs."""
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ValueError(f"inputs must have shape (N, {model.input_dim}), got {x.shape}")
    z = (x - model.input_offset) / model.input_scale
    return ACTIVATIONS[model.activation](z @ model.hidden_weights.T + model.hidden_biases)


def batch_train(model, inputs, targets, ridge=1e-6):
    """Fit output weights by least squares; hidden layer is unchanged.

    ``ridge > 0`` solves the regularized normal equations
    (H^T H + ridge I) beta = H^T T; ridge = 0 takes the pseudoinverse
    route, which also minimizes the residual for rank-deficient H.
    """
    H = hidden_output(model, inputs)
    T = np.asarray(targets, dtype=float)
    if T.ndim == 1:
        T = T[:, None]
    if T.shape != (H.shape[0], model.output_dim):
        raise ValueError(
            f"targets must have shape ({H.shape[0]}, {model.output_dim}), got {T.shape}"
        )
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    if ridge == 0:
        beta, *_ = np.linalg.lstsq(H, T, rcond=None)
    else:
        A = H.T @ H + ridge * np.eye(model.hidden_count)
        try:
            beta = np.linalg.solve(A, H.T @ T)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                f"normal matrix is singular beyond regularization "
                f"(cond={np.linalg.cond(A):.3e})"
            ) from exc
    if not np.all(np.isfinite(beta)):
        raise NumericalError(
            f"non-finite output weights (cond(H)={np.linalg.cond(H):.3e})"
        )
    return replace(model, output_weights=beta)


def predict(model, x):
    """Network output for one input vector, shape (output_dim,)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.input_dim,):
        raise ValueError(f"input must have shape ({model.input_dim},), got {x.shape}")
    return (hidden_output(model, x[None, :]) @ model.output_weights)[0]


def predict_batch(model, inputs):
    """Network outputs for a batch of inputs, shape (N, output_dim)."""
    return hidden_output(model, inputs) @ model.output_weights


# ---------------------------------------------------------------------------
# recursive least squares


@dataclass
class RlsState:
    """Streaming least-squares state: current output weights and the
    inverse-Gram accumulator M. Single writer; updates mutate in place."""

    beta: np.ndarray
    M: np.ndarray
    update_count: int = 0

    def __post_init__(self):
        self.beta = np.ascontiguousarray(self.beta, dtype=float)
        self.M = np.ascontiguousarray(self.M, dtype=float)
        nb = self.beta.shape[0]
        if self.beta.ndim != 2 or self.M.shape != (nb, nb):
            raise ValueError("beta must be (hidden, out) and M (hidden, hidden)")
        if np.abs(self.M - self.M.T).max() > 1e-8:
            raise ValueError("M must be symmetric to within 1e-8")


def _rls_step_py(beta, M, h, t):
    # Reference implementation used when numba is unavailable. Each update
    # term (Mh)(Mh)^T / denom is evaluated once per (i, j) pair and written
    # to both triangles, so M stays exactly symmetric and the mandated
    # re-symmetrization M <- (M + M^T)/2 is the identity.
    Mh = M @ h
    denom = 1.0 + h @ Mh
    n = M.shape[0]
    for i in range(n):
        mhi = Mh[i]
        for j in range(i, n):
            v = M[i, j] - (mhi * Mh[j]) / denom
            M[i, j] = v
            M[j, i] = v
    K = M @ h
    pred = h @ beta
    for j in range(beta.shape[1]):
        innov = t[j] - pred[j]
        for i in range(n):
            beta[i, j] += K[i] * innov


if _HAVE_NUMBA:
    _rls_step = numba.njit(cache=True)(_rls_step_py)
else:  # pragma: no cover
    _rls_step = _rls_step_py


def rls_init(model, inputs0=None, targets0=None, ridge=1e-6):
    """Streaming state seeded from an optional initial batch.

    With no initial data the state starts at beta = 0, M = I / ridge;
    otherwise beta is the ridge batch solution and M the corresponding
    regularized inverse Gram matrix.
    """
    if ridge <= 0:
        raise ValueError("ridge must be > 0")
    nb, m = model.hidden_count, model.output_dim
    if inputs0 is None or len(inputs0) == 0:
        return RlsState(beta=np.zeros((nb, m)), M=np.eye(nb) / ridge)
    H0 = hidden_output(model, inputs0)
    T0 = np.asarray(targets0, dtype=float)
    if T0.ndim == 1:
        T0 = T0[:, None]
    if T0.shape != (H0.shape[0], m):
        raise ValueError(f"targets must have shape ({H0.shape[0]}, {m}), got {T0.shape}")
    A = H0.T @ H0 + ridge * np.eye(nb)
    try:
        M = np.linalg.inv(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular init Gram matrix (cond={np.linalg.cond(A):.3e})") from exc
    M = 0.5 * (M + M.T)
    return RlsState(beta=M @ (H0.T @ T0), M=M)


def rls_update(state, h, t):
    """One recursive least-squares step on observation (h, t).

    Applies the inverse-Gram downdate
    M <- M - (M h h^T M) / (1 + h^T M h) followed by
    beta <- beta + M h (t^T - h^T beta), mutating the state in place and
    returning it. The downdate writes one symmetric evaluation to both
    triangles, which keeps M exactly symmetric.
    """
    h = np.ascontiguousarray(h, dtype=float)
    t = np.ascontiguousarray(t, dtype=float).reshape(-1)
    if h.shape != (state.M.shape[0],):
        raise ValueError(f"h must have shape ({state.M.shape[0]},), got {h.shape}")
    if t.shape != (state.beta.shape[1],):
        raise ValueError(f"t must have shape ({state.beta.shape[1]},), got {t.shape}")
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(t))):
        raise NumericalError("non-finite observation passed to rls_update")
    _rls_step(state.beta, state.M, h, t)
    state.update_count += 1
    return state


def rls_sweep(state, H, T):
    """Stream the rows of (H, T) through the update in order.

    Equivalent to calling :func:`rls_update` row by row (bit-identical;
    both run the same kernel), with the validation hoisted out of the
    inner loop.
    """
    H = np.ascontiguousarray(H, dtype=float)
    T = np.ascontiguousarray(T, dtype=float)
    if T.ndim == 1:
        T = T[:, None]
    if H.ndim != 2 or H.shape[1] != state.M.shape[0] or T.shape != (H.shape[0], state.beta.shape[1]):
        raise ValueError("H and T rows do not match the state dimensions")
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(T))):
        raise NumericalError("non-finite observations passed to rls_sweep")
    for k in range(H.shape[0]):
        _rls_step(state.beta, state.M, H[k], T[k])
    state.update_count += H.shape[0]
    return state


# ---------------------------------------------------------------------------
# persistence

MODEL_FORMAT = "slfn-model"
MODEL_VERSION = 1


def model_to_doc(model):
    """JSON-ready document; floats survive a round trip bit-exactly."""
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "input_dim": model.input_dim,
        "hidden_count": model.hidden_count,
        "output_dim": model.output_dim,
        "activation": model.activation,
        "hidden_weights": model.hidden_weights.tolist(),
        "hidden_biases": model.hidden_biases.tolist(),
        "output_weights": model.output_weights.tolist(),
        "input_offset": model.input_offset.tolist(),
        "input_scale": model.input_scale.tolist(),
    }


def model_from_doc(doc):
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"not a {MODEL_FORMAT} document")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')!r}")
    return SlfnModel(
        input_dim=int(doc["input_dim"]),
        hidden_count=int(doc["hidden_count"]),
        output_dim=int(doc["output_dim"]),
        hidden_weights=np.asarray(doc["hidden_weights"], dtype=float),
        hidden_biases=np.asarray(doc["hidden_biases"], dtype=float),
        output_weights=np.asarray(doc["output_weights"], dtype=float),
        activation=doc["activation"],
        input_offset=np.asarray(doc["input_offset"], dtype=float),
        input_scale=np.asarray(doc["input_scale"], dtype=float),
    )


def dump_canonical_json(doc, path):
    """Write a deterministic JSON rendering (sorted keys, repr floats)."""
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def save_model(model, path):
    dump_canonical_json(model_to_doc(model), path)


def load_model(path):
    with open(path) as fh:
        return model_from_doc(json.load(fh))
