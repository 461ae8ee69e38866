import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from varwave.expr import (ArityError, DomainError, ExprError, ParseError, UnknownIdentifier,
                          eval_with_derivatives, parse, parse_scalar_function, to_source)

COMPOSITE = "exp(-x^2)*sin(3*x) + tanh(x)/(2 + cos(x)) + sqrt(1 + x^2) - arctan(x)^3"


def test_gaussian_first_derivative_at_peak():
    f = parse_scalar_function("exp(-x^2)")
    assert eval_with_derivatives(f, 0.0, 1) == [1.0, 0.0]


def test_shifted_sine_jet():
    f = parse_scalar_function("2 + sin(x)")
    assert eval_with_derivatives(f, 0.0, 2) == pytest.approx([2.0, 1.0, 0.0], abs=1e-15)


def _richardson_fd(f, x, k, step=1e-4):
    """k-th derivative by centered differences, refined once by Richardson."""
    def nth(hh):
        g = f
        for _ in range(k):
            g = (lambda g0: (lambda y: (g0(y + hh) - g0(y - hh)) / (2 * hh)))(g)
        return g(x)
    return (4 * nth(step / 2) - nth(step)) / 3


@pytest.mark.parametrize("k", [1, 2, 3])
def test_composite_matches_finite_differences(k):
    f = parse_scalar_function(COMPOSITE)
    # lower-order exact derivatives keep the difference stencil shallow
    base = f.derivative(k - 1)
    fd = _richardson_fd(lambda y: float(base(y)), 0.3, 1, step=1e-3)
    exact = eval_with_derivatives(f, 0.3, k)[k]
    assert abs(fd - exact) <= 1e-6 * max(1.0, abs(exact))


def test_full_third_order_by_nested_differences():
    f = parse_scalar_function(COMPOSITE)
    fd = _richardson_fd(lambda y: float(f(y)), 0.3, 3, step=1e-2)
    assert fd == pytest.approx(eval_with_derivatives(f, 0.3, 3)[3], rel=1e-5)


@pytest.mark.parametrize("src,value", [
    ("1 + 2*3", 7.0), ("2^3^1", None), ("-x^2", -4.0), ("(-x)^2", 4.0),
    ("x/2/2", 0.5), ("2e-1*x", 0.4), (".5*x", 1.0), ("pi", math.pi), ("e", math.e),
    ("x^(-1)", 0.5), ("x^-2", 0.25),
])
def test_precedence_and_literals(src, value):
    if value is None:
        with pytest.raises(ParseError):
            parse_scalar_function(src)
        return
    assert float(parse_scalar_function(src)(2.0)) == pytest.approx(value, rel=1e-15)


@pytest.mark.parametrize("src,exc", [
    ("x +", ParseError), ("2 x", ParseError), ("sin x", ParseError), ("y + 1", UnknownIdentifier),
    ("foo(x)", UnknownIdentifier), ("sin(x, 2)", ArityError), ("x^1.5", ParseError),
    ("(x", ParseError), ("", ParseError),
])
def test_malformed_sources_are_rejected(src, exc):
    with pytest.raises(exc) as info:
        parse_scalar_function(src)
    assert isinstance(info.value.pos, int)


@pytest.mark.parametrize("src,x", [("1/x", 0.0), ("sqrt(x)", -1.0), ("sqrt(x - 2)", 0.0)])
def test_domain_errors_name_the_subexpression(src, x):
    f = parse_scalar_function(src)
    with pytest.raises(DomainError) as info:
        f(x)
    assert info.value.subexpr


def test_parameters_must_be_bound():
    f = parse_scalar_function("lam*exp(-x^2)", "x", ("lam",))
    assert f.params == ("lam",)
    with pytest.raises(ExprError):
        f(0.0)
    assert float(f.bind(lam=3.0)(0.0)) == 3.0
    with pytest.raises(ExprError):
        f.bind(mu=1.0)


def test_unused_parameter_is_dropped():
    assert parse_scalar_function("x^2", "x", ("lam",)).params == ()


def test_constant_detection():
    assert parse_scalar_function("1 + pi").is_constant
    assert not parse_scalar_function("1 + 0*x^2 + x").is_constant


def test_vectorized_jet_shapes():
    f = parse_scalar_function("3")
    v, d1 = f.jet(np.zeros((4, 5)), 1)
    assert v.shape == d1.shape == (4, 5)
    assert np.all(v == 3) and np.all(d1 == 0)


def test_order_out_of_range():
    with pytest.raises(ValueError):
        parse_scalar_function("x").jet(0.0, 4)


finite = st.floats(-2.0, 2.0, allow_nan=False)
SOURCES = ["sin(x)*exp(x)", "x^3 - 2*x", "tanh(2*x)", "1/(1 + x^2)", "cos(x)^2", "arctan(x/3)"]


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(SOURCES), st.sampled_from(SOURCES), finite, finite, finite)
def test_linearity(fs, gs, a, b, x):
    f, g = parse_scalar_function(fs), parse_scalar_function(gs)
    h = parse_scalar_function(f"({a!r})*({fs}) + ({b!r})*({gs})")
    for k, (hv, fv, gv) in enumerate(zip(h.jet(x, 3), f.jet(x, 3), g.jet(x, 3))):
        want = a * fv + b * gv
        scale = abs(a * fv) + abs(b * gv) + 1e-300
        assert abs(hv - want) <= 1e-13 * max(scale, 1.0)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(SOURCES + [COMPOSITE]))
def test_derivative_consistency(src):
    f = parse_scalar_function(src)
    xs = np.random.default_rng(7).uniform(-2, 2, 100)
    jf = f.jet(xs, 3)
    df = f.derivative(1).jet(xs, 2)
    for k in range(1, 4):
        np.testing.assert_allclose(jf[k], df[k - 1], rtol=1e-12, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(SOURCES + [COMPOSITE]), finite)
def test_canonical_text_round_trips(src, x):
    node = parse(src)
    again = parse_scalar_function(to_source(node))
    assert float(again(x)) == pytest.approx(float(parse_scalar_function(src)(x)), rel=1e-14,
                                            abs=1e-14)
