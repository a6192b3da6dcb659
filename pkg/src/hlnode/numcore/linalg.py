"""Dense symmetric eigenvalue helpers for tiny matrices.

Eigenvalues come from the closed form for 2x2 and cyclic Jacobi rotations
otherwise; the matrices here never exceed a handful of rows, so robustness
beats speed. The smallest-absolute-eigenvalue operation also has a
reverse-differentiable path: the minimizing eigenvector is computed from
detached values and the eigenvalue re-expressed as the quadratic form
v' M v, whose gradient is the standard first-order perturbation result
(a subgradient at eigenvalue crossings).
"""

from __future__ import annotations

import numpy as np

from .tape import Var

__all__ = ["sym_eig", "jacobi_sym_eig", "smallest_abs_eigenvalue",
           "smallest_abs_eig_pair"]


def _require_symmetric(m: np.ndarray) -> None:
    if m.shape[-1] != m.shape[-2]:
        raise ValueError(f"matrix must be square, got shape {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
    if np.max(np.abs(m - np.swapaxes(m, -1, -2))) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")


def jacobi_sym_eig(m: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100):
    """Cyclic Jacobi rotations; returns (eigenvalues, eigenvector columns)."""
    a = np.array(m, dtype=float)
    n = a.shape[0]
    vecs = np.eye(n)
    scale = max(1.0, float(np.max(np.abs(a))))
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off = max(off, abs(a[p, q]))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= tol * scale * 1e-2:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.hypot(1.0, tau))
                else:
                    t = -1.0 / (-tau + np.hypot(1.0, tau))
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                rp, rq = a[p].copy(), a[q].copy()
                a[p] = c * rp - s * rq
                a[q] = s * rp + c * rq
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                vp, vq = vecs[:, p].copy(), vecs[:, q].copy()
                vecs[:, p] = c * vp - s * vq
                vecs[:, q] = s * vp + c * vq
    return np.diag(a).copy(), vecs


def _eig2_batch(ms: np.ndarray):
    """Closed-form eigenpair with smallest |eigenvalue| for (..., 2, 2)."""
    a = ms[..., 0, 0]
    b = 0.5 * (ms[..., 0, 1] + ms[..., 1, 0])
    d = ms[..., 1, 1]
    mid = 0.5 * (a + d)
    rad = np.hypot(0.5 * (a - d), b)
    lam_hi = mid + rad
    lam_lo = mid - rad
    # ties pick the first of the descending sort
    take_hi = np.abs(lam_hi) <= np.abs(lam_lo)
    lam = np.where(take_hi, lam_hi, lam_lo)
    # eigenvector: the better conditioned of (b, lam-a) and (lam-d, b)
    c1 = np.stack([b, lam - a], axis=-1)
    c2 = np.stack([lam - d, b], axis=-1)
    n1 = np.linalg.norm(c1, axis=-1)
    n2 = np.linalg.norm(c2, axis=-1)
    use1 = n1 >= n2
    vec = np.where(use1[..., None], c1, c2)
    norm = np.where(use1, n1, n2)
    degenerate = norm < 1e-300
    vec = np.where(degenerate[..., None],
                   np.broadcast_to(np.array([1.0, 0.0]), vec.shape), vec)
    norm = np.where(degenerate, 1.0, norm)
    return lam, vec / norm[..., None]


def smallest_abs_eig_pair(ms: np.ndarray):
    """Signed eigenvalue of smallest magnitude and its unit eigenvector.

    Accepts a single (n, n) matrix or a batch (..., n, n); symmetry is the
    caller's responsibility here (entries are symmetrized for n = 2).
    """
    ms = np.asarray(ms, dtype=float)
    n = ms.shape[-1]
    if n == 1:
        return ms[..., 0, 0], np.ones(ms.shape[:-1])
    if n == 2:
        return _eig2_batch(ms)
    flat = ms.reshape((-1, n, n))
    lams = np.empty(flat.shape[0])
    vecs = np.empty((flat.shape[0], n))
    for i, m in enumerate(flat):
        w, v = jacobi_sym_eig(0.5 * (m + m.T))
        j = int(np.argmin(np.abs(w)))
        lams[i] = w[j]
        vecs[i] = v[:, j]
    return lams.reshape(ms.shape[:-2]), vecs.reshape(ms.shape[:-2] + (n,))


def sym_eig(m: np.ndarray):
    """All eigenvalues and eigenvector columns of one symmetric matrix."""
    m = np.asarray(m, dtype=float)
    _require_symmetric(m)
    n = m.shape[0]
    if n == 1:
        return np.array([m[0, 0]]), np.eye(1)
    if n == 2:
        a, b, d = m[0, 0], 0.5 * (m[0, 1] + m[1, 0]), m[1, 1]
        mid = 0.5 * (a + d)
        rad = np.hypot(0.5 * (a - d), b)
        w = np.array([mid + rad, mid - rad])
        c1 = np.array([b, w[0] - a])
        c2 = np.array([w[0] - d, b])
        v = c1 if np.linalg.norm(c1) >= np.linalg.norm(c2) else c2
        nv = np.linalg.norm(v)
        v = np.array([1.0, 0.0]) if nv < 1e-300 else v / nv
        return w, np.stack([v, np.array([-v[1], v[0]])], axis=-1)
    return jacobi_sym_eig(m)


def smallest_abs_eigenvalue(m):
    """min over eigenvalues of |lambda| for a symmetric matrix.

    For a plain (n, n) ndarray returns a float. For a Var of shape
    (..., n, n) returns a Var of shape (...) whose gradient is the
    eigenvalue perturbation v v' (times the sign of the eigenvalue).
    """
    if isinstance(m, Var):
        vals = m.value
        _require_symmetric(vals)
        lam, vec = smallest_abs_eig_pair(vals)
        row = np.expand_dims(vec, -2)       # (..., 1, n), constant
        col = np.expand_dims(vec, -1)       # (..., n, 1), constant
        quad = (row @ m) @ col              # (..., 1, 1) on tape
        return quad.reshape(vals.shape[:-2]).abs()
    m = np.asarray(m, dtype=float)
    _require_symmetric(m)
    lam, _ = smallest_abs_eig_pair(m)
    return float(np.abs(lam)) if lam.ndim == 0 else np.abs(lam)
