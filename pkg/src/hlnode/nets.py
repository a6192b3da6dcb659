"""Multilayer perceptrons, the symmetric matrix head, and optimization.

Forward passes are written against the numcore dispatchers, so the same
code evaluates on plain arrays (inference), tape Vars (reverse-mode
training) and Dual2 numbers (input derivatives), including duals whose
components live on a tape.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .numcore import Tape, Var
from .numcore import ops
from .numcore.ops import value_of

__all__ = [
    "MlpParams", "SymMatrixHead", "mlp_init", "mlp_forward",
    "sym_head_init", "g_forward", "params_to_vars", "head_to_vars",
    "flatten_params", "unflatten_params", "save_mlp", "load_mlp",
    "save_head", "load_head", "RAdamState", "radam_init", "radam_step",
    "clip_grad_norm", "grad_norm", "LrSchedule", "plateau_update",
    "NonFiniteGradientError",
]


class NonFiniteGradientError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# MLP
# ---------------------------------------------------------------------------

@dataclass
class MlpParams:
    """Per-layer weights (fan_in, fan_out) and biases; Softplus hidden layers."""
    weights: list
    biases: list
    widths: list
    activation: str = "softplus"

    @property
    def arrays(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


def mlp_init(widths, rng: np.random.Generator) -> MlpParams:
    """Uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases."""
    widths = list(int(w) for w in widths)
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        s = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-s, s, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights=weights, biases=biases, widths=widths)


def mlp_forward(p: MlpParams, x):
    """Affine-Softplus chain with a linear output layer."""
    if value_of(x).shape[-1] != p.widths[0]:
        raise ValueError(
            f"input width {value_of(x).shape[-1]} != layer width {p.widths[0]}")
    h = x
    last = len(p.weights) - 1
    for i, (w, b) in enumerate(zip(p.weights, p.biases)):
        h = h @ w + b
        if i != last:
            h = ops.softplus(h)
    return h


def params_to_vars(p: MlpParams, tape: Tape) -> MlpParams:
    return MlpParams(weights=[tape.leaf(w) for w in p.weights],
                     biases=[tape.leaf(b) for b in p.biases],
                     widths=list(p.widths), activation=p.activation)


def flatten_params(p: MlpParams) -> np.ndarray:
    return np.concatenate([np.asarray(a, dtype=float).ravel()
                           for a in p.arrays])


def unflatten_params(flat: np.ndarray, widths, activation="softplus") -> MlpParams:
    widths = list(int(w) for w in widths)
    weights, biases = [], []
    k = 0
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        weights.append(flat[k:k + fan_in * fan_out].reshape(fan_in, fan_out).copy())
        k += fan_in * fan_out
        biases.append(flat[k:k + fan_out].copy())
        k += fan_out
    if k != flat.size:
        raise ValueError("flat parameter size does not match widths")
    return MlpParams(weights=weights, biases=biases, widths=widths,
                     activation=activation)


# ---------------------------------------------------------------------------
# Symmetric matrix head
# ---------------------------------------------------------------------------

def _tri_assembly(n: int) -> np.ndarray:
    """0/1 map from upper-triangle entries to the flattened n x n matrix."""
    tri = n * (n + 1) // 2
    a = np.zeros((tri, n * n))
    k = 0
    for i in range(n):
        for j in range(i, n):
            a[k, i * n + j] = 1.0
            a[k, j * n + i] = 1.0
            k += 1
    return a


@dataclass
class SymMatrixHead:
    """MLP producing n(n+1)/2 raw outputs, mapped through sinh to a
    symmetric matrix (mirrored entries share one source value)."""
    mlp: MlpParams
    dim: int
    time_dependent: bool
    _assembly: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self._assembly is None:
            self._assembly = _tri_assembly(self.dim)


def sym_head_init(dim: int, hidden, time_dependent: bool,
                  rng: np.random.Generator) -> SymMatrixHead:
    n_in = 2 * dim + (1 if time_dependent else 0)
    widths = [n_in, *hidden, dim * (dim + 1) // 2]
    return SymMatrixHead(mlp=mlp_init(widths, rng), dim=dim,
                         time_dependent=time_dependent)


def g_forward(head: SymMatrixHead, t, x, v):
    """Symmetric matrix field value at (t, x, v); t ignored unless the
    head is time dependent."""
    parts = [x, v]
    if head.time_dependent:
        parts = [ops.expand_last(t), x, v]
    raw = mlp_forward(head.mlp, ops.concat_last(parts))
    flat = ops.sinh(raw) @ head._assembly
    return ops.reshape_last(flat, (head.dim, head.dim))


def head_to_vars(head: SymMatrixHead, tape: Tape) -> SymMatrixHead:
    return SymMatrixHead(mlp=params_to_vars(head.mlp, tape), dim=head.dim,
                         time_dependent=head.time_dependent,
                         _assembly=head._assembly)


# ---------------------------------------------------------------------------
# Checkpoint files: flat array + JSON sidecar
# ---------------------------------------------------------------------------

def _atomic_write(path: str, write_fn):
    tmp = path + ".tmp"
    write_fn(tmp)
    os.replace(tmp, path)


def save_mlp(path_prefix: str, p: MlpParams, extra: dict | None = None) -> None:
    flat = flatten_params(p)

    def write_npy(tmp):
        with open(tmp, "wb") as fh:
            np.save(fh, flat)

    meta = {"widths": [int(w) for w in p.widths],
            "activation": p.activation}
    meta.update(extra or {})

    def write_json(tmp):
        with open(tmp, "w") as fh:
            fh.write(json.dumps(meta, sort_keys=True, indent=2))

    _atomic_write(path_prefix + ".npy", write_npy)
    _atomic_write(path_prefix + ".json", write_json)


def load_mlp(path_prefix: str) -> tuple[MlpParams, dict]:
    flat = np.load(path_prefix + ".npy")
    with open(path_prefix + ".json") as fh:
        meta = json.load(fh)
    return unflatten_params(flat, meta["widths"], meta["activation"]), meta


def save_head(path_prefix: str, head: SymMatrixHead,
              extra: dict | None = None) -> None:
    meta = {"dim": head.dim, "time_dependent": head.time_dependent}
    meta.update(extra or {})
    save_mlp(path_prefix, head.mlp, meta)


def load_head(path_prefix: str) -> tuple[SymMatrixHead, dict]:
    mlp, meta = load_mlp(path_prefix)
    return SymMatrixHead(mlp=mlp, dim=int(meta["dim"]),
                         time_dependent=bool(meta["time_dependent"])), meta


# ---------------------------------------------------------------------------
# RAdam
# ---------------------------------------------------------------------------

@dataclass
class RAdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = None
    v: list = None


def radam_init(params: list, lr: float) -> RAdamState:
    return RAdamState(lr=lr,
                      m=[np.zeros_like(p) for p in params],
                      v=[np.zeros_like(p) for p in params])


def radam_step(state: RAdamState, params: list, grads: list) -> None:
    """One in-place update; rectified adaptive step once the variance
    estimate is tractable (rho_t > 4), plain momentum before that."""
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError("non-finite gradient; step rejected")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    b1t, b2t = b1 ** t, b2 ** t
    rho_inf = 2.0 / (1.0 - b2) - 1.0
    rho = rho_inf - 2.0 * t * b2t / (1.0 - b2t)
    rect = None
    if rho > 4.0:
        rect = np.sqrt(((rho - 4.0) * (rho - 2.0) * rho_inf)
                       / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho))
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1t)
        if rect is None:
            p -= state.lr * m_hat
        else:
            p -= state.lr * rect * m_hat / (np.sqrt(v / (1.0 - b2t)) + state.eps)


def grad_norm(grads: list) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


def clip_grad_norm(grads: list, c1: float) -> list:
    """Rescale so the global 2-norm is at most c1; direction preserved."""
    if c1 <= 0:
        raise ValueError("clip threshold must be positive")
    norm = grad_norm(grads)
    if norm <= c1:
        return grads
    scale = c1 / norm
    return [g * scale for g in grads]


# ---------------------------------------------------------------------------
# Reduce-on-plateau learning rate
# ---------------------------------------------------------------------------

@dataclass
class LrSchedule:
    lr: float
    lr0: float
    patience: int = 25
    factor: float = 0.5
    min_lr: float = 1e-4
    rel_threshold: float = 1e-4
    best: float = np.inf
    bad_epochs: int = 0

    def __post_init__(self):
        if not (self.min_lr <= self.lr0 <= 1e-1):
            raise ValueError("initial learning rate must lie in "
                             f"[{self.min_lr}, 0.1], got {self.lr0}")


def plateau_update(s: LrSchedule, epoch_loss: float) -> LrSchedule:
    """Halve (by `factor`) after `patience` epochs without relative improvement."""
    if epoch_loss < s.best * (1.0 - s.rel_threshold):
        s.best = epoch_loss
        s.bad_epochs = 0
        return s
    s.bad_epochs += 1
    if s.bad_epochs >= s.patience:
        s.lr = max(s.lr * s.factor, s.min_lr)
        s.bad_epochs = 0
    return s
