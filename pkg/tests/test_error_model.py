import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import grid_max
from optuner import (DomainError, Expr, build_error_model, differentiate, evaluate_model,
                     lagrange_remainder, linearize, parse_expression, verify_configuration)
from optuner.catalog import ImplSpec
from optuner.error_model import EPS_BASE, ErrorModel, slack

U = 2.0**-52
D = 2.0**-1074


def program(text):
    e, inputs = parse_expression(text)
    return linearize(e, [i.name for i in inputs]), inputs


def test_adjoint_of_inner_call():
    seq, _ = program("(FPCore (x) :pre (<= 0 x 1) (exp (sin x)))")
    v, adj = differentiate(seq, 0)
    s = Expr.call("sin", Expr.var("x"))
    assert v is s
    assert adj is Expr.call("exp", s)


def test_adjoint_of_result_is_one():
    seq, _ = program("(FPCore (x) :pre (<= 0 x 1) (sin x))")
    _, adj = differentiate(seq, seq.result)
    assert adj.op == "const" and adj.value == 1.0


def test_product_rule():
    seq, _ = program("(FPCore (x) :pre (<= 0 x 1) (* (sin x) (cos x)))")
    _, adj = differentiate(seq, seq.site_index("sin1"))
    assert adj is Expr.call("cos", Expr.var("x"))


def test_single_exp():
    seq, inputs = program("(FPCore (x) :pre (<= 0 x 1) (exp x))")
    m = build_error_model(seq, inputs)
    assert m.A[0] == pytest.approx(math.e, rel=1e-4) and m.A[0] >= math.e
    assert m.B[0] == 1.0
    assert m.constant == 0.0


def test_exp_of_sin():
    seq, inputs = program("(FPCore (x) :pre (<= 0 x 1.5707963267948966) (exp (sin x)))")
    m = build_error_model(seq, inputs)
    a_sin, b_sin = m.coefficient("sin1")
    a_exp, b_exp = m.coefficient("exp1")
    # oracle: max |exp(sin x) sin x| and max |exp(sin x)| on the grid
    xs = (0, math.pi / 2)
    assert a_sin >= grid_max(lambda t: np.exp(np.sin(t)) * np.sin(t), [xs])
    assert a_sin == pytest.approx(math.e, rel=1e-4)
    assert b_sin == pytest.approx(math.e, rel=1e-4)
    assert a_exp == pytest.approx(math.e, rel=1e-4)
    assert b_exp == 1.0


def test_fixed_operations_fold_into_constant():
    seq, inputs = program("(FPCore (x y) :pre (and (<= 1 x 2) (<= 1 y 2)) (* x y))")
    m = build_error_model(seq, inputs)
    assert m.sites == ()
    # max |x*y| = 4, charged one ulp, plus the subnormal term
    assert m.constant == pytest.approx(4 * EPS_BASE + D, rel=1e-4)


def test_missing_site_rejected(povprog):
    _, inputs, seq = povprog
    m = build_error_model(seq, inputs)
    with pytest.raises(KeyError):
        evaluate_model(m, {"cos1": (U, D)})


def test_domain_checked():
    seq, inputs = program("(FPCore (x) :pre (<= -1 x 1) (log x))")
    with pytest.raises(DomainError):
        build_error_model(seq, inputs)


def test_relative_model():
    seq, inputs = program("(FPCore (x) :pre (<= 0 x 1) (exp x))")
    m = build_error_model(seq, inputs, relative=True)
    assert m.kind == "relative"
    assert m.A[0] == pytest.approx(math.e, rel=1e-4)
    seq, inputs = program("(FPCore (x) :pre (<= -1 x 1) (sin x))")
    with pytest.raises(DomainError):
        build_error_model(seq, inputs, relative=True)


def test_argument_rows():
    seq, inputs = program("(FPCore (x) :pre (<= 0 x 8) (log (+ 1 (exp x))))")
    m = build_error_model(seq, inputs)
    arg = seq.nodes[seq.site_index("log1")].args[0]
    row = m.rows[arg]
    exp_site = seq.site_index("exp1")
    assert row.A[exp_site] == pytest.approx(math.exp(8), rel=1e-4)
    assert row.B[exp_site] == 1.0
    assert row.constant > 0


def _model():
    return ErrorModel((0, 1, 2, 3), ("a", "b", "c", "d"), (1.5, 1.0, 2.0, 0.5),
                      (1.0, 3.0, 1.0, 1.0), 1e-15)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 3), st.floats(1, 1e6), st.floats(0, 1e-10), st.floats(0, 1e-10))
def test_scaling_one_site_is_linear(site, t, eps, delta):
    m = _model()
    base = {l: (1e-16, 1e-300) for l in m.labels}
    base[m.labels[site]] = (eps, delta)
    scaled = dict(base)
    scaled[m.labels[site]] = (eps * t, delta)
    r1, r0 = evaluate_model(m, scaled), evaluate_model(m, base)
    d0 = Fraction(r1) - Fraction(r0)
    expected = Fraction(m.A[site]) * (Fraction(eps * t) - Fraction(eps))
    # each result is the exact sum rounded to nearest
    rounding = Fraction(math.ulp(r1)) / 2 + Fraction(math.ulp(r0)) / 2
    assert abs(d0 - expected) <= rounding + Fraction(1e-300)


def test_sin_remainder_is_second_order():
    seq, inputs = program("(FPCore (x) :pre (<= 0 x 1.5707963267948966) (sin x))")
    assert lagrange_remainder(seq, inputs, {"sin1": (U, D)}) <= 2.0**-100


def test_remainder_of_product():
    # sin(x)(1+e1) * cos(y)(1+e2) * (1+e3); the exact second and third order
    # part at e = r is |sin x cos y| (r1 r2 + r1 r3 + r2 r3 + r1 r2 r3)
    seq, inputs = program("(FPCore (x y) :pre (and (<= 0 x 1) (<= 0 y 1)) (* (sin x) (cos y)))")
    r = 2.0**-20
    R = lagrange_remainder(seq, inputs, {"sin1": (r, 0.0), "cos1": (r, 0.0)})
    peak = math.sin(1.0)
    exact = peak * (r * r + 2 * r * EPS_BASE + r * r * EPS_BASE)
    assert exact <= R <= exact * 1.01 + 1e-300


def test_verify_povprog(povprog):
    _, inputs, seq = povprog
    m = build_error_model(seq, inputs)
    config = {l: (U, D) for l in seq.labels}
    v = verify_configuration(seq, inputs, config)
    assert v.valid
    assert 0 < v.bound <= evaluate_model(m, config) * 1.001


@pytest.mark.parametrize("hi_gap, ok", [(1e-16, False), (1e-14, True)])
def test_range_verdict_uses_argument_error(hi_gap, ok):
    seq, inputs = program("(FPCore (x y) :pre (and (<= 0 x 1) (<= 0 y 1)) (sin (* x y)))")
    spec = ImplSpec("sin", "narrow", -2.0, 1.0 + hi_gap, 0.0, 1e-10, 1.0)
    v = verify_configuration(seq, inputs, {"sin1": spec})
    assert v.valid is ok
    if not ok:
        assert "sin1" in v.reasons[0]


def test_slack_formula():
    from optuner.optimize import Interval
    assert slack(Interval(-0.7, 0.7), -0.785, 0.785) == pytest.approx(0.085)
    assert slack(Interval(-math.pi, math.pi), -0.78, 0.78) < 0
    assert slack(Interval(0, 1), -1.8e308, 1.8e308) == math.inf
