import numpy as np
import pytest

from hlnode.numcore import Dual2, seed_triplet
from hlnode.odeparse import (Binary, Call, DomainError, Name, Num, ParseError,
                             ParsedSystem, Unary, acceleration_fn, evaluate,
                             parse, to_source)
from hlnode.systems import (acceleration, douglas_spec, kepler_spec,
                            oscillator_spec)


# ----------------------------------------------------------------- parsing

def test_parse_quadratic_system():
    sys = parse("x1^2 + x2^2 ; 1*x1", 2)
    assert sys.dim == 2
    f = evaluate(sys, 0.0, np.array([[1.0, 2.0]]), np.zeros((1, 2)))
    np.testing.assert_allclose(f, [[5.0, 1.0]])


def test_parse_zero_system():
    sys = parse("0 ; 0", 2)
    f = evaluate(sys, 0.0, np.array([[3.0, 4.0]]), np.zeros((1, 2)))
    np.testing.assert_array_equal(f, [[0.0, 0.0]])


def test_index_out_of_range():
    with pytest.raises(ParseError) as e:
        parse("x3", 2)
    assert "out of range" in str(e.value)


def test_unknown_identifier():
    with pytest.raises(ParseError) as e:
        parse("foo + 1", 1)
    assert "unknown identifier" in str(e.value)


def test_syntax_error_position():
    with pytest.raises(ParseError) as e:
        parse("x1 + ", 1)
    assert "column" in str(e.value)


def test_component_count_mismatch():
    with pytest.raises(ParseError):
        parse("x1 ; x2 ; t", 2)


def test_precedence_power_over_unary_minus():
    sys = parse("-x1^2", 1)
    f = evaluate(sys, 0.0, np.array([[3.0]]), np.zeros((1, 1)))
    assert f[0, 0] == -9.0


def test_power_right_associative():
    sys = parse("2^3^2", 1)
    f = evaluate(sys, 0.0, np.ones((1, 1)), np.ones((1, 1)))
    assert f[0, 0] == 512.0


def test_left_associativity():
    sys = parse("8 - 3 - 2 ; 12 / 3 / 2", 2)
    f = evaluate(sys, 0.0, np.ones((1, 2)), np.ones((1, 2)))
    np.testing.assert_allclose(f, [[3.0, 2.0]])


def test_whitespace_insensitive():
    a = parse(" x1 + 2 * v2 ; t ", 2)
    b = parse("x1+2*v2;t", 2)
    assert a == b


def test_functions():
    sys = parse("sin(t) + cos(0) ; exp(log(x1)) + sqrt(x2^2)", 2)
    f = evaluate(sys, np.array([0.5]), np.array([[2.0, 3.0]]),
                 np.zeros((1, 2)))
    np.testing.assert_allclose(f[0], [np.sin(0.5) + 1.0, 5.0])


# ------------------------------------------------------------- evaluation

def test_simple_product():
    sys = parse("x1*v2", 1)
    with pytest.raises(ParseError):
        parse("x1*v2", 0)
    sys = parse("x1*v2 ; 0", 2)
    f = evaluate(sys, 0.0, np.array([[2.0, 0.0]]), np.array([[0.0, 3.0]]))
    assert f[0, 0] == 6.0


def test_radial_balance_zero():
    # first two-body component with GM=1 written as an expression
    sys = parse("x1*v2^2 - 1/x1^2 ; 0", 2)
    f = evaluate(sys, 0.0, np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]))
    assert f[0, 0] == pytest.approx(0.0, abs=1e-15)


def test_dual_partial_of_product():
    sys = parse("x1*v2^2 ; 0", 2)
    td, xd, vd = seed_triplet(np.zeros(1), np.array([[2.0, 0.0]]),
                              np.array([[0.0, 3.0]]), order=2)
    f = evaluate(sys, td, xd, vd)
    # seed 4 is v2; d/dv2 (x1 v2^2) = 2 x1 v2 = 12
    assert f.first[4, 0, 0] == pytest.approx(12.0)


def test_division_domain_error():
    sys = parse("1/x1", 1)
    with pytest.raises(DomainError):
        evaluate(sys, 0.0, np.zeros((1, 1)), np.zeros((1, 1)))


def test_log_sqrt_domain_error():
    with pytest.raises(DomainError):
        evaluate(parse("log(x1)", 1), 0.0, np.array([[-1.0]]), np.zeros((1, 1)))
    with pytest.raises(DomainError):
        evaluate(parse("sqrt(x1)", 1), 0.0, np.array([[-4.0]]), np.zeros((1, 1)))


def test_dual_first_partials_vs_fd():
    rng = np.random.default_rng(0)
    sources = ["x1^2*v1 + sin(x2) ; exp(v2/2) - t*x1",
               "sqrt(x1+2)*cos(v1) ; x2^3 - v1*v2",
               "1/(x1+3) + t^2 ; log(x2+4)*v1"]
    for src in sources:
        sys = parse(src, 2)
        for _ in range(33):
            t0 = rng.uniform(0, 1, size=1)
            x0 = rng.uniform(0.5, 1.5, size=(1, 2))
            v0 = rng.uniform(-1, 1, size=(1, 2))
            td, xd, vd = seed_triplet(t0, x0, v0, order=1)
            f = evaluate(sys, td, xd, vd)
            h = 1e-5
            for s, (dt, dx, dv) in enumerate(
                    [(1, np.zeros((1, 2)), np.zeros((1, 2))),
                     (0, np.array([[1.0, 0]]), np.zeros((1, 2))),
                     (0, np.array([[0, 1.0]]), np.zeros((1, 2))),
                     (0, np.zeros((1, 2)), np.array([[1.0, 0]])),
                     (0, np.zeros((1, 2)), np.array([[0, 1.0]]))]):
                fp = evaluate(sys, t0 + h * dt, x0 + h * dx, v0 + h * dv)
                fm = evaluate(sys, t0 - h * dt, x0 - h * dx, v0 - h * dv)
                fd = (fp - fm) / (2 * h)
                np.testing.assert_allclose(f.first[s], fd, rtol=1e-6,
                                           atol=1e-7)


def test_parsed_matches_builtin_systems():
    rng = np.random.default_rng(1)
    osc = oscillator_spec(omega=(2.0, 3.0), gamma=(2.0, 0.0))
    pairs = [
        (osc, "-4*x1 - 2*v1 ; -9*x2"),
        (kepler_spec(gm=1.0), "x1*v2^2 - 1/x1^2 ; -2*v1*v2/x1"),
        (douglas_spec(xi=1.0), "x1^2 + x2^2 ; 1*x1"),
        (douglas_spec(xi=0.0), "x1^2 + x2^2 ; 0"),
    ]
    for spec, src in pairs:
        sys = parse(src, 2)
        for _ in range(100):
            t = rng.uniform(0, 1, size=1)
            x = rng.uniform(0.5, 1.5, size=(1, 2))
            v = rng.uniform(-1, 1, size=(1, 2))
            np.testing.assert_allclose(evaluate(sys, t, x, v),
                                       acceleration(spec, t, x, v),
                                       rtol=1e-14, atol=1e-14)


# ------------------------------------------------------------- printing

def _random_ast(rng, depth, dim):
    if depth == 0 or rng.random() < 0.3:
        choice = rng.integers(0, 3)
        if choice == 0:
            return Num(float(rng.integers(0, 10)))
        if choice == 1:
            return Name("t", 0)
        return Name("x" if rng.random() < 0.5 else "v",
                    int(rng.integers(0, dim)))
    c = rng.random()
    if c < 0.15:
        return Unary("neg", _random_ast(rng, depth - 1, dim))
    if c < 0.3:
        return Call(["sin", "cos", "exp"][int(rng.integers(0, 3))],
                    _random_ast(rng, depth - 1, dim))
    op = ["+", "-", "*", "/", "^"][int(rng.integers(0, 5))]
    return Binary(op, _random_ast(rng, depth - 1, dim),
                  _random_ast(rng, depth - 1, dim))


def test_print_parse_idempotent_on_random_asts():
    rng = np.random.default_rng(2)
    for _ in range(100):
        ast = _random_ast(rng, 4, 2)
        sys = ParsedSystem(dim=2, components=(ast, Num(0.0)))
        printed = to_source(sys)
        reparsed = parse(printed, 2)
        assert reparsed == parse(to_source(reparsed), 2)
        assert to_source(reparsed) == printed


def test_print_parse_roundtrip_examples():
    for src in ["x1^2 + x2^2 ; 1*x1", "-x1^2 ; t*v1",
                "sin(x1)*cos(v2) ; 1/(x2+2)"]:
        sys = parse(src, 2)
        assert parse(to_source(sys), 2) == sys


def test_acceleration_fn_adapter():
    f = acceleration_fn(parse("-x1 ; -x2", 2))
    np.testing.assert_allclose(f(0.0, np.array([[1.0, 2.0]]), np.zeros((1, 2))),
                               [[-1.0, -2.0]])
