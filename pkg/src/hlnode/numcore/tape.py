"""Reverse-mode automatic differentiation over numpy arrays.

A ``Tape`` records every operation in creation order, which is already a
valid topological order, so the backward pass is a single reverse sweep
over the node list (a Wengert list). ``Var`` wraps an ndarray payload and
overloads arithmetic so ordinary numpy-style code builds the graph; the
other operand of a binary op may be a plain array or scalar, which is
treated as a constant.

Broadcasting follows numpy semantics; every vector-Jacobian product sums
gradients back down to the parent's shape before accumulation.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Tape", "Var", "stack", "concat"]


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (the adjoint of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form avoids overflow for large |x|
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class Tape:
    """Single-owner operation record; one recording per worker, no sharing."""

    def __init__(self):
        self._nodes: list[Var] = []

    def leaf(self, value) -> "Var":
        """Register an input node whose gradient will be accumulated."""
        return Var(self, np.asarray(value, dtype=float))

    # a constant is just a leaf whose gradient the caller never reads
    constant = leaf

    def __len__(self) -> int:
        return len(self._nodes)

    def backward(self, out: "Var") -> None:
        """Accumulate d(out)/d(node) into ``.grad`` of every node.

        ``out`` is normally scalar; for array outputs the seed is all-ones
        (the gradient of ``out.sum()``).
        """
        if out.tape is not self:
            raise ValueError("output Var does not belong to this tape")
        for node in self._nodes:
            node.grad = None
        out.grad = np.ones_like(out.value)
        for node in reversed(self._nodes):
            if node.grad is None or node._vjp is None:
                continue
            for parent, g in zip(node._parents, node._vjp(node.grad)):
                if g is None:
                    continue
                parent.grad = g if parent.grad is None else parent.grad + g


class Var:
    """Node on a :class:`Tape` holding an ndarray value."""

    __slots__ = ("tape", "value", "grad", "_parents", "_vjp")

    # keep numpy from absorbing `ndarray <op> Var` into an object array
    __array_ufunc__ = None
    __array_priority__ = 1000

    def __init__(self, tape: Tape, value: np.ndarray, parents=(), vjp=None):
        self.tape = tape
        self.value = value
        self.grad = None
        self._parents = parents
        self._vjp = vjp
        tape._nodes.append(self)

    # -- introspection -------------------------------------------------
    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def item(self) -> float:
        return float(self.value)

    def __repr__(self):
        return f"Var(shape={self.value.shape})"

    def _check_tape(self, other: "Var"):
        if other.tape is not self.tape:
            raise ValueError("cannot combine Vars from different tapes")

    # -- arithmetic ----------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Var):
            self._check_tape(other)
            sa, sb = self.value.shape, other.value.shape
            return Var(self.tape, self.value + other.value, (self, other),
                       lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))
        c = np.asarray(other, dtype=float)
        sa = self.value.shape
        return Var(self.tape, self.value + c, (self,),
                   lambda g: (_unbroadcast(g, sa),))

    __radd__ = __add__

    def __neg__(self):
        return Var(self.tape, -self.value, (self,), lambda g: (-g,))

    def __sub__(self, other):
        if isinstance(other, Var):
            self._check_tape(other)
            sa, sb = self.value.shape, other.value.shape
            return Var(self.tape, self.value - other.value, (self, other),
                       lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))
        c = np.asarray(other, dtype=float)
        sa = self.value.shape
        return Var(self.tape, self.value - c, (self,),
                   lambda g: (_unbroadcast(g, sa),))

    def __rsub__(self, other):
        c = np.asarray(other, dtype=float)
        sa = self.value.shape
        return Var(self.tape, c - self.value, (self,),
                   lambda g: (_unbroadcast(-g, sa),))

    def __mul__(self, other):
        if isinstance(other, Var):
            self._check_tape(other)
            a, b = self.value, other.value
            return Var(self.tape, a * b, (self, other),
                       lambda g: (_unbroadcast(g * b, a.shape),
                                  _unbroadcast(g * a, b.shape)))
        c = np.asarray(other, dtype=float)
        sa = self.value.shape
        return Var(self.tape, self.value * c, (self,),
                   lambda g: (_unbroadcast(g * c, sa),))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            self._check_tape(other)
            a, b = self.value, other.value
            val = a / b
            return Var(self.tape, val, (self, other),
                       lambda g: (_unbroadcast(g / b, a.shape),
                                  _unbroadcast(-g * val / b, b.shape)))
        c = np.asarray(other, dtype=float)
        sa = self.value.shape
        return Var(self.tape, self.value / c, (self,),
                   lambda g: (_unbroadcast(g / c, sa),))

    def __rtruediv__(self, other):
        c = np.asarray(other, dtype=float)
        a = self.value
        val = c / a
        return Var(self.tape, val, (self,),
                   lambda g: (_unbroadcast(-g * val / a, a.shape),))

    def __pow__(self, p):
        if isinstance(p, Var):
            raise TypeError("only constant exponents are supported")
        p = float(p)
        a = self.value
        val = a ** p
        return Var(self.tape, val, (self,),
                   lambda g: (g * p * a ** (p - 1.0),))

    def __matmul__(self, other):
        if isinstance(other, Var):
            self._check_tape(other)
            a, b = self.value, other.value
            if a.ndim < 2 or b.ndim < 2:
                raise ValueError("matmul operands must have ndim >= 2")
            return Var(self.tape, a @ b, (self, other),
                       lambda g: (_unbroadcast(g @ np.swapaxes(b, -1, -2), a.shape),
                                  _unbroadcast(np.swapaxes(a, -1, -2) @ g, b.shape)))
        b = np.asarray(other, dtype=float)
        a = self.value
        if a.ndim < 2 or b.ndim < 2:
            raise ValueError("matmul operands must have ndim >= 2")
        return Var(self.tape, a @ b, (self,),
                   lambda g: (_unbroadcast(g @ np.swapaxes(b, -1, -2), a.shape),))

    def __rmatmul__(self, other):
        a = np.asarray(other, dtype=float)
        b = self.value
        if a.ndim < 2 or b.ndim < 2:
            raise ValueError("matmul operands must have ndim >= 2")
        return Var(self.tape, a @ b, (self,),
                   lambda g: (_unbroadcast(np.swapaxes(a, -1, -2) @ g, b.shape),))

    # -- elementwise functions ------------------------------------------
    def exp(self):
        val = np.exp(self.value)
        return Var(self.tape, val, (self,), lambda g: (g * val,))

    def log(self):
        a = self.value
        return Var(self.tape, np.log(a), (self,), lambda g: (g / a,))

    def sqrt(self):
        val = np.sqrt(self.value)
        return Var(self.tape, val, (self,), lambda g: (0.5 * g / val,))

    def sin(self):
        a = self.value
        return Var(self.tape, np.sin(a), (self,), lambda g: (g * np.cos(a),))

    def cos(self):
        a = self.value
        return Var(self.tape, np.cos(a), (self,), lambda g: (-g * np.sin(a),))

    def sinh(self):
        a = self.value
        return Var(self.tape, np.sinh(a), (self,), lambda g: (g * np.cosh(a),))

    def cosh(self):
        a = self.value
        return Var(self.tape, np.cosh(a), (self,), lambda g: (g * np.sinh(a),))

    def tanh(self):
        val = np.tanh(self.value)
        return Var(self.tape, val, (self,), lambda g: (g * (1.0 - val * val),))

    def softplus(self):
        a = self.value
        sig = _sigmoid(a)
        return Var(self.tape, np.logaddexp(0.0, a), (self,),
                   lambda g: (g * sig,))

    def sigmoid(self):
        val = _sigmoid(self.value)
        return Var(self.tape, val, (self,),
                   lambda g: (g * val * (1.0 - val),))

    def abs(self):
        a = self.value
        # subgradient 0 at the kink
        return Var(self.tape, np.abs(a), (self,), lambda g: (g * np.sign(a),))

    def clip_min(self, floor: float):
        """max(x, floor); gradient follows the active branch (0 when clipped)."""
        a = self.value
        mask = a >= floor
        return Var(self.tape, np.where(mask, a, floor), (self,),
                   lambda g: (g * mask,))

    def clamp_min_ste(self, floor: float):
        """max(x, floor) in value; gradient passes through as if unclamped."""
        return Var(self.tape, np.maximum(self.value, floor), (self,),
                   lambda g: (g,))

    # -- shape ops -------------------------------------------------------
    def __getitem__(self, idx):
        a = self.value
        val = a[idx]

        def vjp(g):
            out = np.zeros_like(a)
            np.add.at(out, idx, g)
            return (out,)

        return Var(self.tape, val, (self,), vjp)

    def reshape(self, shape):
        a = self.value
        return Var(self.tape, a.reshape(shape), (self,),
                   lambda g: (g.reshape(a.shape),))

    def transpose(self, axes):
        inv = tuple(np.argsort(axes))
        return Var(self.tape, self.value.transpose(axes), (self,),
                   lambda g: (g.transpose(inv),))

    def swapaxes(self, i, j):
        return Var(self.tape, self.value.swapaxes(i, j), (self,),
                   lambda g: (g.swapaxes(i, j),))

    def expand_dims(self, axis):
        a = self.value
        return Var(self.tape, np.expand_dims(a, axis), (self,),
                   lambda g: (g.reshape(a.shape),))

    # -- reductions --------------------------------------------------------
    def sum(self, axis=None, keepdims=False):
        a = self.value
        val = a.sum(axis=axis, keepdims=keepdims)

        def vjp(g):
            if axis is None:
                return (np.broadcast_to(g, a.shape),)
            gg = g if keepdims else np.expand_dims(g, axis)
            return (np.broadcast_to(gg, a.shape),)

        return Var(self.tape, val, (self,), vjp)

    def mean(self, axis=None, keepdims=False):
        a = self.value
        count = a.size if axis is None else np.prod(
            [a.shape[ax] for ax in (axis if isinstance(axis, tuple) else (axis,))])
        s = self.sum(axis=axis, keepdims=keepdims)
        return s * (1.0 / float(count))


def _lift(parts, tape: Tape) -> list[Var]:
    return [p if isinstance(p, Var) else tape.constant(p) for p in parts]


def _find_tape(parts) -> Tape:
    for p in parts:
        if isinstance(p, Var):
            return p.tape
    raise TypeError("no Var among operands")


def stack(parts, axis: int = -1) -> Var:
    """Stack Vars (constants lifted) along a new axis."""
    tape = _find_tape(parts)
    vs = _lift(parts, tape)
    val = np.stack([v.value for v in vs], axis=axis)

    def vjp(g):
        gm = np.moveaxis(g, axis, 0)
        return tuple(gm[i] for i in range(len(vs)))

    return Var(tape, val, tuple(vs), vjp)


def concat(parts, axis: int = -1) -> Var:
    """Concatenate Vars (constants lifted) along an existing axis."""
    tape = _find_tape(parts)
    vs = _lift(parts, tape)
    val = np.concatenate([v.value for v in vs], axis=axis)
    sizes = [v.value.shape[axis] for v in vs]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return Var(tape, val, tuple(vs), vjp)
