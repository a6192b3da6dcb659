"""Seeded forward-mode derivatives of acceleration maps, and gradient checks.

The seed layout for a state (t, x, v) with x, v of dimension n is fixed:
direction 0 is t, directions 1..n the components of x, directions
n+1..2n the components of v. All consumers of :class:`FPartials` rely on
this ordering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dual import Dual2
from .ops import value_of
from .tape import Tape, Var

__all__ = ["FPartials", "seed_triplet", "jacobians_of_f", "grad_check",
           "EvaluationError"]


class EvaluationError(RuntimeError):
    """A derivative evaluation produced non-finite output."""


def seed_triplet(t, x, v, order: int = 2):
    """Dual-seed a batch of states; returns (t, x, v) as Dual2.

    t: (B,), x: (B, n), v: (B, n). Seed count is k = 1 + 2n.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    b, n = x.shape
    k = 1 + 2 * n

    t_first = np.zeros((k, b))
    t_first[0] = 1.0
    x_first = np.zeros((k, b, n))
    v_first = np.zeros((k, b, n))
    for i in range(n):
        x_first[1 + i, :, i] = 1.0
        v_first[1 + n + i, :, i] = 1.0

    if order == 1:
        return (Dual2(t, t_first), Dual2(x, x_first), Dual2(v, v_first))
    return (Dual2(t, t_first, np.zeros((k, k, b))),
            Dual2(x, x_first, np.zeros((k, k, b, n))),
            Dual2(v, v_first, np.zeros((k, k, b, n))))


@dataclass
class FPartials:
    """First and mixed-second partials of an acceleration f(t, x, v).

    Index convention: j_x[b, j, i] = d f_j / d x_i (same for j_v).
    jv_dot is the total time derivative of j_v along the flow, using
    x'' = f for the velocity argument; None when assembled at order 1.
    Components are ndarrays or tape Vars, depending on how f was evaluated.
    """
    f: object
    j_x: object
    j_v: object
    f_t: object
    jv_dot: object = None


def _col_weights(w, n: int, b: int):
    """(B, n) -> (n, 1, B, 1) so it weights a (n, i, B, j) seed block."""
    return w.transpose((1, 0)).reshape((n, 1, b, 1))


def jacobians_of_f(f, t, x, v, order: int = 2) -> FPartials:
    """Evaluate f with dual seeds and collect the partials needed downstream.

    f is called once on Dual2 arguments; its parameters may live on a tape,
    in which case every returned component is a Var.
    """
    x = np.asarray(x, dtype=float)
    b, n = x.shape
    td, xd, vd = seed_triplet(t, x, v, order=order)
    out = f(td, xd, vd)
    if not isinstance(out, Dual2):
        raise TypeError("acceleration map must propagate dual numbers")

    fval = out.value
    first = out.first                       # (k, B, n)
    f_t = first[0]
    j_x = first[1:1 + n].transpose((1, 2, 0))
    j_v = first[1 + n:1 + 2 * n].transpose((1, 2, 0))

    jv_dot = None
    if order == 2:
        s = out.second                      # (k, k, B, n)
        t_block = s[0, 1 + n:1 + 2 * n]     # (i, B, j)
        xv = s[1:1 + n, 1 + n:1 + 2 * n]    # (m, i, B, j)
        vv = s[1 + n:1 + 2 * n, 1 + n:1 + 2 * n]
        wx = _col_weights(np.asarray(v, dtype=float), n, b)
        if isinstance(fval, Var):
            wf = fval.transpose((1, 0)).reshape((n, 1, b, 1))
        else:
            wf = _col_weights(fval, n, b)
        jv_dot = (t_block + (xv * wx).sum(axis=0) + (vv * wf).sum(axis=0))
        jv_dot = jv_dot.transpose((1, 2, 0))

    for name, comp in (("f", fval), ("df/dx", j_x), ("df/dv", j_v),
                       ("df/dt", f_t), ("d/dt df/dv", jv_dot)):
        if comp is None:
            continue
        if not np.all(np.isfinite(value_of(comp))):
            raise EvaluationError(f"non-finite partial {name}")
    return FPartials(f=fval, j_x=j_x, j_v=j_v, f_t=f_t, jv_dot=jv_dot)


def grad_check(scalar_fn, leaves, step: float = 1e-4) -> float:
    """Max relative mismatch of reverse-mode vs central finite differences.

    ``scalar_fn`` receives a list of leaf values (Vars during the recorded
    pass, plain arrays during the difference pass) and returns a scalar.
    """
    leaves = [np.asarray(a, dtype=float) for a in leaves]
    tape = Tape()
    lvars = [tape.leaf(a) for a in leaves]
    out = scalar_fn(lvars)
    tape.backward(out)
    rev = [lv.grad if lv.grad is not None else np.zeros_like(lv.value)
           for lv in lvars]

    worst = 0.0
    for i, base in enumerate(leaves):
        flat = base.reshape(-1)
        for j in range(flat.size):
            h = step * max(1.0, abs(flat[j]))
            plus = [a.copy() for a in leaves]
            minus = [a.copy() for a in leaves]
            plus[i].reshape(-1)[j] += h
            minus[i].reshape(-1)[j] -= h
            fd = (float(value_of(scalar_fn(plus)))
                  - float(value_of(scalar_fn(minus)))) / (2.0 * h)
            r = np.asarray(rev[i]).reshape(-1)[j]
            worst = max(worst, abs(r - fd) / (abs(fd) + 1e-12))
    return worst
