import numpy as np
import pytest

from hlnode.numcore import (Tape, jacobi_sym_eig, smallest_abs_eig_pair,
                            smallest_abs_eigenvalue, sym_eig)


def test_identity_2x2():
    assert smallest_abs_eigenvalue(np.eye(2)) == pytest.approx(1.0)


def test_known_eigenvalues_2x2():
    # characteristic polynomial of [[2,1],[1,2]]: (2-l)^2 - 1 -> l in {1, 3}
    m = np.array([[2.0, 1.0], [1.0, 2.0]])
    assert smallest_abs_eigenvalue(m) == pytest.approx(1.0)
    w, vecs = sym_eig(m)
    np.testing.assert_allclose(sorted(w), [1.0, 3.0], atol=1e-12)
    for i in range(2):
        np.testing.assert_allclose(m @ vecs[:, i], w[i] * vecs[:, i],
                                   atol=1e-12)


def test_zero_matrix():
    assert smallest_abs_eigenvalue(np.zeros((2, 2))) == 0.0


def test_scaled_identity_property():
    for c in [-3.5, -1.0, 0.0, 0.25, 7.0]:
        for n in [2, 3, 5]:
            assert smallest_abs_eigenvalue(c * np.eye(n)) == pytest.approx(
                abs(c), abs=1e-12)


def test_non_symmetric_rejected():
    with pytest.raises(ValueError):
        smallest_abs_eigenvalue(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_jacobi_matches_numpy_random_matrices():
    rng = np.random.default_rng(0)
    for n in [3, 4, 6]:
        for _ in range(20):
            a = rng.normal(size=(n, n))
            m = 0.5 * (a + a.T)
            w, v = jacobi_sym_eig(m)
            np.testing.assert_allclose(sorted(w), sorted(np.linalg.eigvalsh(m)),
                                       atol=1e-9)
            np.testing.assert_allclose(v @ np.diag(w) @ v.T, m, atol=1e-9)


def test_matches_l_minus_2_norm_definition():
    # smallest |eigenvalue| equals min over unit vectors of |m u| for symmetric m
    rng = np.random.default_rng(1)
    angles = np.linspace(0, np.pi, 200_001)
    us = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    for _ in range(50):
        a = rng.normal(size=(2, 2))
        m = 0.5 * (a + a.T)
        lam = smallest_abs_eigenvalue(m)
        brute = np.min(np.linalg.norm(us @ m.T, axis=-1))
        assert lam <= brute + 1e-12          # sampled min is an upper bound
        assert brute - lam < 1e-6


def test_batched_pair_agrees_with_single():
    rng = np.random.default_rng(2)
    a = rng.normal(size=(40, 2, 2))
    ms = 0.5 * (a + np.swapaxes(a, -1, -2))
    lam, vec = smallest_abs_eig_pair(ms)
    for i in range(40):
        assert abs(lam[i]) == pytest.approx(
            smallest_abs_eigenvalue(ms[i]), abs=1e-12)
        # eigenvector property
        np.testing.assert_allclose(ms[i] @ vec[i], lam[i] * vec[i], atol=1e-9)


def test_gradient_of_smallest_abs_eigenvalue():
    # quadratic-form path: d|lam|/dm = sign(lam) v v^T away from crossings
    m0 = np.array([[2.0, 0.5], [0.5, -0.7]])
    tape = Tape()
    mv = tape.leaf(m0)
    lam = smallest_abs_eigenvalue(mv)
    tape.backward(lam)
    # finite differences on the symmetrized closed form
    h = 1e-6
    g_fd = np.zeros((2, 2))
    for i in range(2):
        for j in range(2):
            mp, mm = m0.copy(), m0.copy()
            mp[i, j] += h
            mm[i, j] -= h
            lp, _ = smallest_abs_eig_pair(mp)
            lm, _ = smallest_abs_eig_pair(mm)
            g_fd[i, j] = (abs(lp) - abs(lm)) / (2 * h)
    np.testing.assert_allclose(mv.grad, g_fd, atol=1e-6)


def test_batched_var_path_values():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(7, 2, 2))
    ms = 0.5 * (a + np.swapaxes(a, -1, -2))
    tape = Tape()
    mv = tape.leaf(ms)
    lam = smallest_abs_eigenvalue(mv)
    expect = np.array([smallest_abs_eigenvalue(ms[i]) for i in range(7)])
    np.testing.assert_allclose(lam.value, expect, atol=1e-12)
