"""Analytic 2-D test systems, their datasets, and known multiplier matrices.

Three families: a (possibly damped) harmonic oscillator, the two-body
problem in polar coordinates (r, phi), and a pair of quadratic ODEs known
to admit no variational multiplier. The time window is normalized to
[0, 1]; frequencies and the gravitational parameter are derived from a
requested number of characteristic periods inside that window.

Acceleration formulas are written against the numcore dispatchers so they
evaluate on plain arrays and on dual numbers alike.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .numcore import ops
from .numcore.ops import value_of
from .odesolve import SolveGrid, State, integrate_arrays

__all__ = [
    "SystemSpec", "Trajectory", "Dataset", "NotLagrangian", "NOT_LAGRANGIAN",
    "SingularityError", "oscillator_spec", "kepler_spec", "douglas_spec",
    "periods_to_parameters", "acceleration", "kepler_initial_state",
    "sample_initial_conditions", "generate_dataset", "analytic_hessian",
    "hessian_field", "dataset_arrays", "save_dataset", "load_dataset",
    "spec_to_dict", "spec_from_dict",
]

KINDS = ("oscillator2d", "kepler", "douglas")

DEFAULT_OSC_IC = {"x0_mean": [1.0, 1.0], "x0_std": [1.0, 1.0],
                  "v0_mode": "gauss", "v0_mean": [0.0, 0.0],
                  "v0_std": [1.0, 1.0], "v0_scale": 1.0}
DEFAULT_DOUGLAS_IC = {"x0_mean": [0.5, 0.5], "x0_std": [0.2, 0.2],
                      "v0_mode": "gauss", "v0_mean": [0.0, 0.0],
                      "v0_std": [0.2, 0.2], "v0_scale": 1.0}
DEFAULT_KEPLER_IC = {"p_mean": 1.0, "p_std": 0.1,
                     "ecc_mean": 0.0, "ecc_std": 0.1}


class SingularityError(RuntimeError):
    pass


class NotLagrangian:
    """Marker: the system admits no multiplier, so no ground-truth matrix."""

    def __repr__(self):
        return "NOT_LAGRANGIAN"


NOT_LAGRANGIAN = NotLagrangian()


@dataclass(frozen=True)
class SystemSpec:
    kind: str
    n_periods: float | None = None
    time_window: float = 1.0
    omega: tuple | None = None          # (w1, w2), oscillator
    gamma: tuple = (0.0, 0.0)           # damping, oscillator
    gm: float | None = None             # kepler
    xi: float = 1.0                     # douglas switch
    ic: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return 2


def periods_to_parameters(n_periods: float, time_window: float, kind: str,
                          a: float | None = None) -> float:
    """Oscillator: angular frequency; two-body: GM from the third law
    (requires the semi-major axis a of the reference orbit)."""
    if n_periods <= 0:
        raise ValueError("n_periods must be positive")
    w = 2.0 * np.pi * n_periods / time_window
    if kind == "oscillator2d":
        return w
    if kind == "kepler":
        if a is None:
            raise ValueError("kepler needs the reference semi-major axis")
        return w * w * a ** 3
    raise ValueError(f"n_periods has no meaning for kind {kind!r}")


def oscillator_spec(n_periods: float = 3.0, damping_ratio: float = 0.0,
                    omega: tuple | None = None, gamma: tuple | None = None,
                    ic: dict | None = None) -> SystemSpec:
    if omega is None:
        w = periods_to_parameters(n_periods, 1.0, "oscillator2d")
        omega = (w, w)
    if gamma is None:
        gamma = (damping_ratio * omega[0], damping_ratio * omega[1])
    merged = dict(DEFAULT_OSC_IC)
    merged.update(ic or {})
    return SystemSpec(kind="oscillator2d", n_periods=n_periods,
                      omega=tuple(float(w) for w in omega),
                      gamma=tuple(float(g) for g in gamma), ic=merged)


def kepler_spec(n_periods: float = 1.0, gm: float | None = None,
                ic: dict | None = None) -> SystemSpec:
    merged = dict(DEFAULT_KEPLER_IC)
    merged.update(ic or {})
    if gm is None:
        a = merged["p_mean"] / (1.0 - merged["ecc_mean"] ** 2)
        gm = periods_to_parameters(n_periods, 1.0, "kepler", a=a)
    return SystemSpec(kind="kepler", n_periods=n_periods, gm=float(gm),
                      ic=merged)


def douglas_spec(xi: float = 1.0, ic: dict | None = None) -> SystemSpec:
    merged = dict(DEFAULT_DOUGLAS_IC)
    merged.update(ic or {})
    return SystemSpec(kind="douglas", xi=float(xi), ic=merged)


# ---------------------------------------------------------------------------
# Dynamics
# ---------------------------------------------------------------------------

def acceleration(spec: SystemSpec, t, x, v):
    """Exact right-hand side x'' = f(t, x, v); evaluable on duals."""
    if spec.kind == "oscillator2d":
        w2 = np.asarray(spec.omega, dtype=float) ** 2
        ga = np.asarray(spec.gamma, dtype=float)
        return -(x * w2) - (v * ga)
    if spec.kind == "kepler":
        r = x[..., 0]
        if np.any(value_of(r) <= 1e-9):
            raise SingularityError("radial coordinate reached the center")
        rdot = v[..., 0]
        phidot = v[..., 1]
        f1 = r * phidot ** 2.0 - spec.gm * r ** -2.0
        f2 = -2.0 * rdot * phidot * r ** -1.0
        return ops.stack_last([f1, f2])
    if spec.kind == "douglas":
        x1 = x[..., 0]
        x2 = x[..., 1]
        return ops.stack_last([x1 * x1 + x2 * x2, spec.xi * x1])
    raise ValueError(f"unknown system kind {spec.kind!r}")


def kepler_initial_state(p: float, ecc: float, gm: float) -> State:
    """Perihelion start of the conic orbit with semi-latus rectum p."""
    if not 0.0 <= ecc < 1.0:
        raise ValueError("bounded orbits need eccentricity in [0, 1)")
    if p <= 0:
        raise ValueError("semi-latus rectum must be positive")
    r0 = p / (1.0 + ecc)
    phidot0 = np.sqrt(gm * p) / r0 ** 2
    return State(x=np.array([r0, 0.0]), v=np.array([0.0, phidot0]), t=0.0)


def _truncated_normal(rng, mean, std, low, high, size):
    out = rng.normal(mean, std, size=size)
    for _ in range(1000):
        bad = (out < low) | (out > high)
        if not np.any(bad):
            return out
        out[bad] = rng.normal(mean, std, size=int(bad.sum()))
    raise RuntimeError("truncated sampling failed to converge")


def sample_initial_conditions(spec: SystemSpec, n: int,
                              rng: np.random.Generator):
    """Batched (x0, v0) draws from the spec's initial-condition family."""
    if spec.kind == "kepler":
        ic = spec.ic
        p = _truncated_normal(rng, ic["p_mean"], ic["p_std"], 0.1, np.inf, n)
        e = _truncated_normal(rng, ic["ecc_mean"], ic["ecc_std"], 0.0, 0.9, n)
        r0 = p / (1.0 + e)
        phidot0 = np.sqrt(spec.gm * p) / r0 ** 2
        x0 = np.stack([r0, np.zeros(n)], axis=-1)
        v0 = np.stack([np.zeros(n), phidot0], axis=-1)
        return x0, v0
    ic = spec.ic
    x0 = rng.normal(ic["x0_mean"], ic["x0_std"], size=(n, 2))
    if ic.get("v0_mode", "gauss") == "abs_x0":
        v0 = ic.get("v0_scale", 1.0) * np.abs(x0)
    else:
        v0 = rng.normal(ic["v0_mean"], ic["v0_std"], size=(n, 2))
    return x0, v0


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray           # (n_t,)
    x: np.ndarray               # (n_t, n)
    v: np.ndarray | None        # (n_t, n) when velocities are supplied
    noisy: bool
    noise_pct: float


@dataclass
class Dataset:
    trajectories: list
    spec: SystemSpec
    seed: int
    n_t: int
    noise_pct: float
    supply_velocity: bool


def generate_dataset(spec: SystemSpec, n_traj: int, n_t: int,
                     noise_pct: float, seed: int,
                     supply_velocity: bool = False,
                     substeps: int = 40) -> Dataset:
    """Integrate clean trajectories and add per-dimension Gaussian noise
    scaled by noise_pct times the ensemble standard deviation."""
    if n_traj < 1 or n_t < 2:
        raise ValueError("need n_traj >= 1 and n_t >= 2")
    rng_ic = np.random.default_rng(np.random.SeedSequence((seed, 0)))
    rng_noise = np.random.default_rng(np.random.SeedSequence((seed, 1)))
    x0, v0 = sample_initial_conditions(spec, n_traj, rng_ic)
    grid = SolveGrid.equidistant(n_t, 0.0, spec.time_window, substeps=substeps)
    xs, vs = integrate_arrays(lambda t, x, v: acceleration(spec, t, x, v),
                              State(x0, v0, 0.0), grid)
    xs = xs.transpose((1, 0, 2))        # (n_traj, n_t, n)
    vs = vs.transpose((1, 0, 2))
    sx = noise_pct * xs.std(axis=(0, 1))
    xs_n = xs + rng_noise.normal(size=xs.shape) * sx
    vs_n = None
    if supply_velocity:
        sv = noise_pct * vs.std(axis=(0, 1))
        vs_n = vs + rng_noise.normal(size=vs.shape) * sv
    trajectories = [
        Trajectory(times=grid.obs_times.copy(), x=xs_n[i],
                   v=None if vs_n is None else vs_n[i],
                   noisy=noise_pct > 0, noise_pct=noise_pct)
        for i in range(n_traj)
    ]
    return Dataset(trajectories=trajectories, spec=spec, seed=seed, n_t=n_t,
                   noise_pct=noise_pct, supply_velocity=supply_velocity)


def dataset_arrays(ds: Dataset):
    """(times (n_t,), X (n_traj, n_t, n), V or None)."""
    times = ds.trajectories[0].times
    x = np.stack([tr.x for tr in ds.trajectories])
    v = None
    if ds.supply_velocity:
        v = np.stack([tr.v for tr in ds.trajectories])
    return times, x, v


# ---------------------------------------------------------------------------
# Ground-truth multiplier matrices
# ---------------------------------------------------------------------------

def hessian_field(spec: SystemSpec):
    """Callable (t, x, v) -> matrix, evaluable on duals; the velocity
    Hessian of the known generating function."""
    if spec.kind == "oscillator2d":
        g1, g2 = spec.gamma
        if g1 == 0.0 and g2 == 0.0:
            def field_undamped(t, x, v):
                b = value_of(x).shape[:-1]
                return np.broadcast_to(np.eye(2), b + (2, 2)).copy()
            return field_undamped

        def field_damped(t, x, v):
            e1 = ops.exp(t * g1)
            e2 = ops.exp(t * g2)
            zero = 0.0 * e1
            flat = ops.stack_last([e1, zero, zero, e2])
            return ops.reshape_last(flat, (2, 2))
        return field_damped
    if spec.kind == "kepler":
        def field_kepler(t, x, v):
            r = x[..., 0]
            one = 0.0 * r + 1.0
            zero = 0.0 * r
            flat = ops.stack_last([one, zero, zero, r * r])
            return ops.reshape_last(flat, (2, 2))
        return field_kepler
    raise ValueError(f"no ground-truth multiplier for kind {spec.kind!r}")


def analytic_hessian(spec: SystemSpec, t, x, v):
    """Ground-truth matrix at given states, or NOT_LAGRANGIAN."""
    if spec.kind == "douglas":
        return NOT_LAGRANGIAN
    return value_of(hessian_field(spec)(np.asarray(t, dtype=float),
                                        np.asarray(x, dtype=float),
                                        np.asarray(v, dtype=float)))


# ---------------------------------------------------------------------------
# File formats: CSV table plus JSON sidecar
# ---------------------------------------------------------------------------

def spec_to_dict(spec: SystemSpec) -> dict:
    d = asdict(spec)
    d["omega"] = None if spec.omega is None else list(spec.omega)
    d["gamma"] = list(spec.gamma)
    return d


def spec_from_dict(d: dict) -> SystemSpec:
    d = dict(d)
    if d.get("omega") is not None:
        d["omega"] = tuple(d["omega"])
    d["gamma"] = tuple(d.get("gamma", (0.0, 0.0)))
    return SystemSpec(**d)


def save_dataset(ds: Dataset, csv_path: str) -> None:
    n = ds.spec.dim
    header = ["traj_id", "time"] + [f"x{i+1}" for i in range(n)]
    if ds.supply_velocity:
        header += [f"v{i+1}" for i in range(n)]
    tmp = csv_path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, tr in enumerate(ds.trajectories):
            for j in range(tr.times.size):
                row = [str(i), repr(float(tr.times[j]))]
                row += [repr(float(val)) for val in tr.x[j]]
                if ds.supply_velocity:
                    row += [repr(float(val)) for val in tr.v[j]]
                w.writerow(row)
    os.replace(tmp, csv_path)
    sidecar = {
        "system": spec_to_dict(ds.spec),
        "seed": int(ds.seed),
        "n_t": int(ds.n_t),
        "n_traj": len(ds.trajectories),
        "noise_pct": float(ds.noise_pct),
        "supply_velocity": bool(ds.supply_velocity),
    }
    tmp = _sidecar_path(csv_path) + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=2)
        fh.write("\n")
    os.replace(tmp, _sidecar_path(csv_path))


def _sidecar_path(csv_path: str) -> str:
    base, _ = os.path.splitext(csv_path)
    return base + ".json"


def load_dataset(csv_path: str) -> Dataset:
    with open(_sidecar_path(csv_path)) as fh:
        meta = json.load(fh)
    spec = spec_from_dict(meta["system"])
    supply_velocity = bool(meta["supply_velocity"])
    n = spec.dim
    by_traj: dict[int, list] = {}
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            by_traj.setdefault(int(row[0]), []).append(
                [float(c) for c in row[1:]])
    trajectories = []
    for tid in sorted(by_traj):
        rows = np.asarray(by_traj[tid])
        trajectories.append(Trajectory(
            times=rows[:, 0].copy(),
            x=rows[:, 1:1 + n].copy(),
            v=rows[:, 1 + n:1 + 2 * n].copy() if supply_velocity else None,
            noisy=meta["noise_pct"] > 0,
            noise_pct=meta["noise_pct"]))
    return Dataset(trajectories=trajectories, spec=spec, seed=meta["seed"],
                   n_t=meta["n_t"], noise_pct=meta["noise_pct"],
                   supply_velocity=supply_velocity)
