"""Type-dispatched numeric primitives.

One set of functions evaluable on plain ndarrays, :class:`Var` tape nodes,
and :class:`Dual2` forward-mode numbers, so that model code (networks,
analytic systems, parsed expressions) is written once and runs in all
three regimes. Dual chain rules delegate second-derivative factors back
through these same functions, which keeps dual-of-Var evaluation on the
tape.
"""

from __future__ import annotations

import numpy as np

from .dual import Dual2, _seed_outer
from .tape import Var, concat as _tape_concat, stack as _tape_stack

__all__ = [
    "value_of", "exp", "log", "sqrt", "sin", "cos", "sinh", "cosh",
    "softplus", "sigmoid", "expand_last", "concat_last", "stack_last",
    "swap_last2", "reshape_last", "clamp_min_ste",
]


def value_of(x) -> np.ndarray:
    """Strip derivative structure down to the plain ndarray value."""
    while isinstance(x, (Dual2, Var)):
        x = x.value
    return np.asarray(x, dtype=float)


def _chain(x: Dual2, val, d1, d2) -> Dual2:
    first = d1 * x.first
    second = None
    if x.second is not None:
        second = d1 * x.second + d2 * _seed_outer(x.first, x.first)
    return Dual2(val, first, second)


def exp(x):
    if isinstance(x, Dual2):
        e = exp(x.value)
        return _chain(x, e, e, e)
    if isinstance(x, Var):
        return x.exp()
    return np.exp(x)


def log(x):
    if isinstance(x, Dual2):
        d1 = x.value ** -1.0 if isinstance(x.value, Var) else 1.0 / x.value
        return _chain(x, log(x.value), d1, -d1 * d1)
    if isinstance(x, Var):
        return x.log()
    return np.log(x)


def sqrt(x):
    if isinstance(x, Dual2):
        s = sqrt(x.value)
        d1 = 0.5 / s
        return _chain(x, s, d1, -0.5 * d1 / x.value)
    if isinstance(x, Var):
        return x.sqrt()
    return np.sqrt(x)


def sin(x):
    if isinstance(x, Dual2):
        return _chain(x, sin(x.value), cos(x.value), -sin(x.value))
    if isinstance(x, Var):
        return x.sin()
    return np.sin(x)


def cos(x):
    if isinstance(x, Dual2):
        return _chain(x, cos(x.value), -sin(x.value), -cos(x.value))
    if isinstance(x, Var):
        return x.cos()
    return np.cos(x)


def sinh(x):
    if isinstance(x, Dual2):
        return _chain(x, sinh(x.value), cosh(x.value), sinh(x.value))
    if isinstance(x, Var):
        return x.sinh()
    return np.sinh(x)


def cosh(x):
    if isinstance(x, Dual2):
        return _chain(x, cosh(x.value), sinh(x.value), cosh(x.value))
    if isinstance(x, Var):
        return x.cosh()
    return np.cosh(x)


def sigmoid(x):
    if isinstance(x, Dual2):
        s = sigmoid(x.value)
        d2 = s * (1.0 - s) * (1.0 - 2.0 * s)
        return _chain(x, s, s * (1.0 - s), d2)
    if isinstance(x, Var):
        return x.sigmoid()
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=float)))


def softplus(x):
    if isinstance(x, Dual2):
        s = sigmoid(x.value)
        return _chain(x, softplus(x.value), s, s * (1.0 - s))
    if isinstance(x, Var):
        return x.softplus()
    return np.logaddexp(0.0, x)


def clamp_min_ste(x, floor: float):
    """max(x, floor) in value, identity in gradient (straight-through)."""
    if isinstance(x, Var):
        return x.clamp_min_ste(floor)
    return np.maximum(x, floor)


def swap_last2(x):
    if isinstance(x, (Var, np.ndarray)):
        return x.swapaxes(-1, -2)
    raise TypeError(f"swap_last2 not supported for {type(x)}")


def expand_last(x):
    """Append a trailing axis of length one."""
    if isinstance(x, Dual2):
        second = None if x.second is None else expand_last(x.second)
        return Dual2(expand_last(x.value), expand_last(x.first), second)
    if isinstance(x, Var):
        return x.reshape(x.shape + (1,))
    x = np.asarray(x, dtype=float)
    return x[..., None]


def reshape_last(x, tail: tuple):
    """Replace the trailing value axis by ``tail`` (e.g. flat -> matrix)."""
    tail = tuple(tail)
    if isinstance(x, Dual2):
        lead = value_of(x.value).shape[:-1]
        return x.reshape_value(lead + tail)
    if isinstance(x, Var):
        return x.reshape(x.shape[:-1] + tail)
    x = np.asarray(x, dtype=float)
    return x.reshape(x.shape[:-1] + tail)


def _join(parts, joiner_np, joiner_tape):
    if any(isinstance(p, Dual2) for p in parts):
        template = next(p for p in parts if isinstance(p, Dual2))
        lifted = [p if isinstance(p, Dual2) else Dual2.constant(p, template)
                  for p in parts]
        value = _join([p.value for p in lifted], joiner_np, joiner_tape)
        first = _join([p.first for p in lifted], joiner_np, joiner_tape)
        second = None
        if template.second is not None:
            second = _join([p.second for p in lifted], joiner_np, joiner_tape)
        return Dual2(value, first, second)
    if any(isinstance(p, Var) for p in parts):
        return joiner_tape(parts)
    return joiner_np([np.asarray(p, dtype=float) for p in parts])


def concat_last(parts):
    """Concatenate along the last value axis."""
    return _join(parts,
                 lambda ps: np.concatenate(ps, axis=-1),
                 lambda ps: _tape_concat(ps, axis=-1))


def stack_last(parts):
    """Stack along a new trailing value axis."""
    return _join(parts,
                 lambda ps: np.stack(ps, axis=-1),
                 lambda ps: _tape_stack(ps, axis=-1))
