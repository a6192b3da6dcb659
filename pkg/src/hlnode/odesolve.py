"""Fixed-step RK4 integration of x'' = f(t, x, x') as a first-order pair.

The solver is unrolled: when f closes over tape Vars (and the initial
velocity is itself a network output on the same tape), gradients flow
back through every stage of every step. Batches share the observation
grid; the state arrays carry the batch in their leading axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nets import MlpParams, mlp_forward
from .numcore.ops import value_of

__all__ = ["State", "SolveGrid", "integrate", "integrate_arrays",
           "initial_velocity", "DivergenceError"]

STATE_BOUND = 1e6


class DivergenceError(RuntimeError):
    """Rollout left the trusted region; reports the failing substep index."""

    def __init__(self, step_index: int):
        super().__init__(f"state diverged at substep {step_index}")
        self.step_index = step_index


@dataclass
class State:
    x: object          # (..., n) position
    v: object          # (..., n) velocity
    t: float


@dataclass
class SolveGrid:
    """Observation times plus internal substeps per observation interval."""
    obs_times: np.ndarray
    substeps: int = 10

    def __post_init__(self):
        self.obs_times = np.asarray(self.obs_times, dtype=float)
        if self.obs_times.ndim != 1 or self.obs_times.size < 1:
            raise ValueError("need at least one observation time")
        if np.any(np.diff(self.obs_times) <= 0):
            raise ValueError("observation times must be strictly increasing")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")

    @classmethod
    def equidistant(cls, n_t: int, t0: float = 0.0, t_end: float = 1.0,
                    substeps: int = 10) -> "SolveGrid":
        if n_t < 2:
            raise ValueError("equidistant grid needs n_t >= 2")
        if not t0 < t_end:
            raise ValueError("t0 must precede t_end")
        return cls(obs_times=np.linspace(t0, t_end, n_t), substeps=substeps)

    def prefix(self, m: int) -> "SolveGrid":
        return SolveGrid(obs_times=self.obs_times[:m], substeps=self.substeps)


def _rk4_step(f, t: float, x, v, h: float):
    k1x = v
    k1v = f(t, x, v)
    k2x = v + (0.5 * h) * k1v
    k2v = f(t + 0.5 * h, x + (0.5 * h) * k1x, v + (0.5 * h) * k1v)
    k3x = v + (0.5 * h) * k2v
    k3v = f(t + 0.5 * h, x + (0.5 * h) * k2x, v + (0.5 * h) * k2v)
    k4x = v + h * k3v
    k4v = f(t + h, x + h * k3x, v + h * k3v)
    x_new = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    v_new = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return x_new, v_new


def _guard(x, v, step_index: int) -> None:
    for arr in (value_of(x), value_of(v)):
        if not np.all(np.isfinite(arr)) or np.max(np.abs(arr)) > STATE_BOUND:
            raise DivergenceError(step_index)


def integrate(f, s0: State, grid: SolveGrid) -> list[State]:
    """Classical RK4 over the grid; returns states at all observation times.

    The first grid time may coincide with s0.t, in which case the initial
    state is returned unmodified as the first entry.
    """
    x, v, t = s0.x, s0.v, float(s0.t)
    out: list[State] = []
    times = grid.obs_times
    start = 0
    if abs(times[0] - t) < 1e-12:
        out.append(State(x=x, v=v, t=t))
        start = 1
    elif times[0] < t:
        raise ValueError("grid starts before the initial state time")
    step_index = 0
    for target in times[start:]:
        h = (target - t) / grid.substeps
        for i in range(grid.substeps):
            x, v = _rk4_step(f, t + i * h, x, v, h)
            step_index += 1
            _guard(x, v, step_index)
        t = float(target)
        out.append(State(x=x, v=v, t=t))
    return out


def integrate_arrays(f, s0: State, grid: SolveGrid):
    """Plain-array convenience: stacked positions and velocities of shape
    (n_obs, ..., n)."""
    states = integrate(f, s0, grid)
    xs = np.stack([value_of(s.x) for s in states])
    vs = np.stack([value_of(s.v) for s in states])
    return xs, vs


def initial_velocity(nn3: MlpParams, x0):
    """Learned initial velocity v0 from the initial position."""
    return mlp_forward(nn3, x0)
