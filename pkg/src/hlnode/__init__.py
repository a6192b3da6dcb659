"""Variational-structure metrics for second-order ODEs and neural ODE training.

The package measures how closely an ODE x'' = f(t, x, x') resembles an
Euler-Lagrange equation via the classical multiplier conditions, exposes
that measure as a differentiable training loss, and trains second-order
neural ODEs regularized by it.
"""

__version__ = "0.1.0"
