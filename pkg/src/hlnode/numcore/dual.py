"""Forward-mode numbers carrying first and optional second derivatives.

A ``Dual2`` holds a value of shape ``V``, first derivatives of shape
``(k,) + V`` for ``k`` seed directions, and (for order 2) the symmetric
matrix of second derivatives of shape ``(k, k) + V``. Seed axes lead so
that trailing-axis operations (broadcast arithmetic, matmul against a
weight matrix, slicing of the last axis) apply uniformly to all three
components.

Components may be plain ndarrays or :class:`~hlnode.numcore.tape.Var`
nodes; in the latter case the forward sweep is itself recorded on the
tape, so a scalar built from dual derivatives stays reverse-differentiable
with respect to tape leaves.
"""

from __future__ import annotations

import numpy as np

from .tape import Var

__all__ = ["Dual2"]


def _expand(c, axis: int):
    if isinstance(c, Var):
        return c.expand_dims(axis)
    return np.expand_dims(c, axis)


def _seed_outer(p, q):
    """p_i q_j over the two leading seed axes: (k,)+V x (k,)+V -> (k,k)+V."""
    return _expand(p, 1) * _expand(q, 0)


class Dual2:
    __slots__ = ("value", "first", "second")
    __array_ufunc__ = None
    __array_priority__ = 1001

    def __init__(self, value, first, second=None):
        self.value = value
        self.first = first
        self.second = second

    # -- helpers --------------------------------------------------------
    @property
    def order(self) -> int:
        return 1 if self.second is None else 2

    @classmethod
    def constant(cls, value, like: "Dual2") -> "Dual2":
        """A dual with zero derivatives, matching the seed count of ``like``."""
        value = np.asarray(value, dtype=float)
        if value.ndim == 0:
            value = np.full(np.shape(_value(like.value)), float(value))
        k = np.shape(_value(like.first))[0]
        first = np.zeros((k,) + value.shape)
        second = None
        if like.second is not None:
            second = np.zeros((k, k) + value.shape)
        return cls(value, first, second)

    def _combine_order(self, other: "Dual2"):
        if (self.second is None) != (other.second is None):
            raise ValueError("cannot mix first- and second-order duals")

    def __repr__(self):
        return f"Dual2(order={self.order})"

    # -- arithmetic -----------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Dual2):
            self._combine_order(other)
            second = None
            if self.second is not None:
                second = self.second + other.second
            return Dual2(self.value + other.value, self.first + other.first, second)
        return Dual2(self.value + other, self.first, self.second)

    __radd__ = __add__

    def __neg__(self):
        second = None if self.second is None else -self.second
        return Dual2(-self.value, -self.first, second)

    def __sub__(self, other):
        return self + (-other) if isinstance(other, Dual2) else Dual2(
            self.value - other, self.first, self.second)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Dual2):
            self._combine_order(other)
            value = self.value * other.value
            first = self.first * other.value + self.value * other.first
            second = None
            if self.second is not None:
                second = (self.second * other.value + self.value * other.second
                          + _seed_outer(self.first, other.first)
                          + _seed_outer(other.first, self.first))
            return Dual2(value, first, second)
        second = None if self.second is None else self.second * other
        return Dual2(self.value * other, self.first * other, second)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual2):
            return self * (other ** -1.0)
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        return (self ** -1.0) * other

    def __pow__(self, p):
        p = float(p)
        v = self.value
        val = v ** p
        d1 = p * v ** (p - 1.0)
        first = d1 * self.first
        second = None
        if self.second is not None:
            d2 = p * (p - 1.0) * v ** (p - 2.0)
            second = d1 * self.second + d2 * _seed_outer(self.first, self.first)
        return Dual2(val, first, second)

    def __matmul__(self, other):
        if isinstance(other, Dual2):
            raise TypeError("matmul between two duals is not supported")
        second = None if self.second is None else self.second @ other
        return Dual2(self.value @ other, self.first @ other, second)

    def __rmatmul__(self, other):
        second = None if self.second is None else other @ self.second
        return Dual2(other @ self.value, other @ self.first, second)

    # -- shape ops --------------------------------------------------------
    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        sl = (slice(None),)
        second = None if self.second is None else self.second[sl + sl + idx]
        return Dual2(self.value[idx], self.first[sl + idx], second)

    def reshape_value(self, shape) -> "Dual2":
        """Reshape the value axes, leaving seed axes untouched."""
        shape = tuple(shape)
        k = np.shape(_value(self.first))[0]
        second = None
        if self.second is not None:
            second = self.second.reshape((k, k) + shape)
        return Dual2(self.value.reshape(shape), self.first.reshape((k,) + shape),
                     second)


def _value(c):
    return c.value if isinstance(c, Var) else np.asarray(c)
