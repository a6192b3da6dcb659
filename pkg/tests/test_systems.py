import numpy as np
import pytest

from hlnode.systems import (NOT_LAGRANGIAN, SingularityError, acceleration,
                            analytic_hessian, dataset_arrays, douglas_spec,
                            generate_dataset, hessian_field,
                            kepler_initial_state, kepler_spec, load_dataset,
                            oscillator_spec, periods_to_parameters,
                            save_dataset, spec_from_dict, spec_to_dict)


# ------------------------------------------------------------ acceleration

def test_oscillator_direct_substitution():
    spec = oscillator_spec(omega=(2.0, 3.0), gamma=(0.0, 0.0))
    f = acceleration(spec, 0.0, np.array([[1.0, 1.0]]), np.array([[5.0, -7.0]]))
    np.testing.assert_allclose(f, [[-4.0, -9.0]])


def test_oscillator_damped_substitution():
    spec = oscillator_spec(omega=(2.0, 3.0), gamma=(2.0, 0.0))
    f = acceleration(spec, 0.0, np.array([[1.0, 1.0]]), np.array([[1.0, 1.0]]))
    np.testing.assert_allclose(f, [[-6.0, -9.0]])


def test_douglas_substitution():
    f = acceleration(douglas_spec(xi=1.0), 0.0, np.array([[1.0, 2.0]]),
                     np.zeros((1, 2)))
    np.testing.assert_allclose(f, [[5.0, 1.0]])
    f0 = acceleration(douglas_spec(xi=0.0), 0.0, np.zeros((1, 2)),
                      np.zeros((1, 2)))
    np.testing.assert_allclose(f0, [[0.0, 0.0]])


def test_kepler_singularity_guard():
    with pytest.raises(SingularityError):
        acceleration(kepler_spec(gm=1.0), 0.0, np.array([[1e-12, 0.0]]),
                     np.zeros((1, 2)))


def test_acceleration_against_independent_rederivation():
    # same closed forms, written independently with plain numpy
    rng = np.random.default_rng(0)
    osc = oscillator_spec(omega=(2.0, 3.0), gamma=(0.5, 0.2))
    kep = kepler_spec(gm=2.5)
    dg1 = douglas_spec(xi=1.0)
    for _ in range(100):
        x = rng.uniform(0.5, 1.5, size=(1, 2))
        v = rng.normal(size=(1, 2))
        fo = acceleration(osc, 0.0, x, v)
        exp_o = np.stack([-x[..., 0] * 4.0 - v[..., 0] * 0.5,
                          -x[..., 1] * 9.0 - v[..., 1] * 0.2], axis=-1)
        np.testing.assert_allclose(fo, exp_o, rtol=1e-15)
        fk = acceleration(kep, 0.0, x, v)
        r, rd, pd = x[..., 0], v[..., 0], v[..., 1]
        exp_k = np.stack([r * pd ** 2.0 - 2.5 * r ** -2.0,
                          -2.0 * rd * pd * r ** -1.0], axis=-1)
        assert np.array_equal(fk, exp_k)
        fd = acceleration(dg1, 0.0, x, v)
        exp_d = np.stack([x[..., 0] * x[..., 0] + x[..., 1] * x[..., 1],
                          1.0 * x[..., 0]], axis=-1)
        assert np.array_equal(fd, exp_d)


# ------------------------------------------------------ initial conditions

def test_kepler_circular_start():
    s = kepler_initial_state(1.0, 0.0, 1.0)
    np.testing.assert_allclose(s.x, [1.0, 0.0])
    np.testing.assert_allclose(s.v, [0.0, 1.0])
    # force balance for the circular orbit: r phidot^2 = GM / r^2
    assert s.x[0] * s.v[1] ** 2 == pytest.approx(1.0)


def test_kepler_eccentric_start():
    s = kepler_initial_state(1.0, 0.5, 1.0)
    assert s.x[0] == pytest.approx(2.0 / 3.0)
    assert s.v[1] == pytest.approx(2.25)


def test_kepler_wide_start():
    s = kepler_initial_state(2.0, 0.0, 1.0)
    assert s.x[0] == pytest.approx(2.0)
    assert s.v[1] == pytest.approx(np.sqrt(2.0) / 4.0)


def test_kepler_unbounded_rejected():
    with pytest.raises(ValueError):
        kepler_initial_state(1.0, 1.0, 1.0)


# ------------------------------------------------------------- parameters

def test_periods_oscillator():
    assert periods_to_parameters(3, 1.0, "oscillator2d") == pytest.approx(6 * np.pi)
    assert periods_to_parameters(1, 1.0, "oscillator2d") == pytest.approx(2 * np.pi)


def test_periods_kepler_third_law():
    gm = periods_to_parameters(1, 1.0, "kepler", a=1.0)
    assert gm == pytest.approx(4 * np.pi ** 2)
    # orbital period of the circular orbit at a=1 equals the window
    t_orbit = 2 * np.pi * np.sqrt(1.0 / gm)
    assert t_orbit == pytest.approx(1.0)


# ---------------------------------------------------------------- hessians

def test_undamped_hessian_is_identity():
    spec = oscillator_spec(omega=(2.0, 3.0))
    g = analytic_hessian(spec, np.zeros(4), np.ones((4, 2)), np.ones((4, 2)))
    np.testing.assert_array_equal(g, np.broadcast_to(np.eye(2), (4, 2, 2)))


def test_kepler_hessian_diag_r_squared():
    g = analytic_hessian(kepler_spec(gm=1.0), np.zeros(1),
                         np.array([[2.0, 0.3]]), np.zeros((1, 2)))
    np.testing.assert_allclose(g[0], np.diag([1.0, 4.0]))


def test_damped_hessian_exponential():
    spec = oscillator_spec(omega=(2.0, 3.0), gamma=(2.0, 0.0))
    g = analytic_hessian(spec, np.array([1.0]), np.ones((1, 2)), np.ones((1, 2)))
    np.testing.assert_allclose(g[0], np.diag([np.e ** 2, 1.0]))


def test_douglas_has_no_hessian():
    out = analytic_hessian(douglas_spec(xi=0.0), 0.0, np.zeros((1, 2)),
                           np.zeros((1, 2)))
    assert out is NOT_LAGRANGIAN
    with pytest.raises(ValueError):
        hessian_field(douglas_spec(xi=1.0))


def test_hessians_symmetric_positive_definite_on_samples():
    rng = np.random.default_rng(1)
    specs = [oscillator_spec(omega=(2.0, 3.0)),
             oscillator_spec(omega=(2.0, 3.0), gamma=(1.0, 0.5)),
             kepler_spec(gm=1.0)]
    for spec in specs:
        t = rng.uniform(0, 1, size=50)
        x = rng.uniform(0.5, 1.5, size=(50, 2))
        v = rng.normal(size=(50, 2))
        g = analytic_hessian(spec, t, x, v)
        np.testing.assert_array_equal(g, np.swapaxes(g, -1, -2))
        for i in range(50):
            assert np.all(np.linalg.eigvalsh(g[i]) > 0)


# ---------------------------------------------------------------- datasets

def test_zero_noise_equals_clean():
    from hlnode.odesolve import SolveGrid, State, integrate_arrays
    from hlnode.systems import sample_initial_conditions

    spec = oscillator_spec(omega=(2.0, 2.0))
    ds0 = generate_dataset(spec, 4, 6, 0.0, seed=5, supply_velocity=True)
    _, x0, v0 = dataset_arrays(ds0)
    # clean reference: same IC stream, direct integration, no noise step
    rng = np.random.default_rng(np.random.SeedSequence((5, 0)))
    ic_x, ic_v = sample_initial_conditions(spec, 4, rng)
    xs, vs = integrate_arrays(lambda t, x, v: acceleration(spec, t, x, v),
                              State(ic_x, ic_v, 0.0),
                              SolveGrid.equidistant(6, substeps=40))
    np.testing.assert_array_equal(x0, xs.transpose((1, 0, 2)))
    np.testing.assert_array_equal(v0, vs.transpose((1, 0, 2)))


def test_dataset_deterministic_under_seed():
    spec = kepler_spec()
    a = generate_dataset(spec, 5, 7, 0.05, seed=11, supply_velocity=True)
    b = generate_dataset(spec, 5, 7, 0.05, seed=11, supply_velocity=True)
    for ta, tb in zip(a.trajectories, b.trajectories):
        np.testing.assert_array_equal(ta.x, tb.x)
        np.testing.assert_array_equal(ta.v, tb.v)


def test_dataset_noise_scale():
    spec = oscillator_spec(omega=(2.0, 2.0), ic={"x0_std": [0.3, 0.3]})
    clean = generate_dataset(spec, 200, 10, 0.0, seed=3)
    noisy = generate_dataset(spec, 200, 10, 0.05, seed=3)
    _, xc, _ = dataset_arrays(clean)
    _, xn, _ = dataset_arrays(noisy)
    resid = xn - xc
    expected = 0.05 * xc.std(axis=(0, 1))
    got = resid.std(axis=(0, 1))
    np.testing.assert_allclose(got, expected, rtol=0.1)


def test_abs_x0_rule():
    spec = oscillator_spec(omega=(2.0, 2.0),
                           ic={"v0_mode": "abs_x0", "v0_scale": 0.1})
    ds = generate_dataset(spec, 3, 4, 0.0, seed=7, supply_velocity=True)
    _, x, v = dataset_arrays(ds)
    np.testing.assert_allclose(v[:, 0, :], 0.1 * np.abs(x[:, 0, :]), atol=1e-12)


def test_csv_roundtrip_bit_exact(tmp_path):
    spec = kepler_spec()
    ds = generate_dataset(spec, 3, 5, 0.05, seed=13, supply_velocity=True)
    path = str(tmp_path / "data.csv")
    save_dataset(ds, path)
    back = load_dataset(path)
    assert back.spec == ds.spec
    for ta, tb in zip(ds.trajectories, back.trajectories):
        np.testing.assert_array_equal(ta.times, tb.times)
        np.testing.assert_array_equal(ta.x, tb.x)
        np.testing.assert_array_equal(ta.v, tb.v)


def test_csv_positions_only(tmp_path):
    ds = generate_dataset(oscillator_spec(), 2, 4, 0.05, seed=1,
                          supply_velocity=False)
    path = str(tmp_path / "d.csv")
    save_dataset(ds, path)
    back = load_dataset(path)
    assert back.trajectories[0].v is None
    np.testing.assert_array_equal(back.trajectories[1].x, ds.trajectories[1].x)


def test_spec_dict_roundtrip():
    for spec in [oscillator_spec(n_periods=3, damping_ratio=0.5),
                 kepler_spec(), douglas_spec(xi=0.0)]:
        assert spec_from_dict(spec_to_dict(spec)) == spec


def test_dataset_validation():
    with pytest.raises(ValueError):
        generate_dataset(oscillator_spec(), 0, 5, 0.0, seed=0)
    with pytest.raises(ValueError):
        generate_dataset(oscillator_spec(), 5, 1, 0.0, seed=0)
