import math

import numpy as np
import pytest

from oracles import grid_max
from optuner import DomainError, Expr, Interval, interval_eval, maximize, maximize_abs, range_of
from optuner import symbolic as sym
from optuner.optimize import OptimizerConfig, make_box

x, y = Expr.var("x"), Expr.var("y")


def test_interval_eval_sin():
    r = interval_eval(Expr.call("sin", x), {"x": Interval(0.0, math.pi / 2)})
    assert r.lo <= 0 and r.hi >= 1 and r.hi <= 1 + 1e-15


def test_interval_eval_product():
    r = interval_eval(Expr.call("mul", x, y), {"x": Interval(-1, 2), "y": Interval(1, 3)})
    assert r.lo <= -3 and r.hi >= 6


def test_interval_eval_pole():
    with pytest.raises(DomainError):
        interval_eval(sym.div(sym.ONE, x), {"x": Interval(-1, 1)})


def test_maximize_abs_sin():
    r = maximize_abs(Expr.call("sin", x), {"x": Interval(0, math.pi / 2)})
    assert 1 <= r.upper <= 1 + 1e-4


def test_maximize_abs_x_plus_cos():
    f = Expr.call("add", x, Expr.call("cos", x))
    r = maximize_abs(f, {"x": Interval(-math.pi, math.pi)})
    oracle = grid_max(lambda t: np.abs(t + np.cos(t)), [(-math.pi, math.pi)])
    assert oracle <= r.upper <= oracle * (1 + 1e-4)
    assert r.lower <= math.pi + 1 <= r.upper


def test_povprog_coefficient():
    th, ph, nx, nz = (Expr.var(v) for v in ("theta", "phi", "nx", "nz"))
    f = sym.mul(Expr.call("cos", th), sym.add(sym.mul(nx, Expr.call("cos", ph)),
                                             sym.mul(nz, Expr.call("sin", ph))))
    box = make_box({"theta": (-math.pi, math.pi), "phi": (-math.pi, math.pi),
                    "nx": (-1, 1), "nz": (-1, 1)})
    r = maximize_abs(f, box)
    assert math.sqrt(2) <= r.upper <= math.sqrt(2) * (1 + 1e-4)


def test_range_of_sin():
    r = range_of(Expr.call("sin", x), {"x": Interval(-math.pi, math.pi)})
    assert r.lo <= -1 and r.hi >= 1 and r.hi <= 1 + 1e-4


def test_range_of_variable_is_exact():
    r = range_of(x, {"x": Interval(-math.pi, math.pi)})
    assert (r.lo, r.hi) == (-math.pi, math.pi)


def test_domain_violation_in_maximize():
    with pytest.raises(DomainError):
        maximize(Expr.call("log", x), {"x": Interval(-1, 1)})


def test_budget_marks_loose():
    f = Expr.call("sin", sym.mul(x, Expr.const(40.0)))
    cfg = OptimizerConfig(rel_tol=1e-12, abs_tol=1e-300, max_subdivisions=3)
    r = maximize(sym.mul(f, y), {"x": Interval(0, 1), "y": Interval(0.5, 1)}, cfg)
    assert r.loose and r.upper >= 1 - 1e-12


def test_bracket_contains_oracle():
    f = sym.mul(Expr.call("exp", x), Expr.call("sin", sym.mul(Expr.const(3.0), x)))
    r = maximize(f, {"x": Interval(-2, 2)})
    oracle = grid_max(lambda t: np.exp(t) * np.sin(3 * t), [(-2, 2)])
    assert r.lower <= oracle * (1 + 1e-9) and oracle <= r.upper
    assert r.upper - r.lower <= 1e-4 * abs(r.upper) + 1e-14
    assert r.argmax is not None


def test_infinite_root_enclosure_is_refined():
    # 1 + x*x straddles zero on the whole box but not on small pieces
    f = sym.div(x, sym.add(Expr.const(1.0), sym.mul(x, x)))
    r = maximize_abs(f, {"x": Interval(-3, 3)})
    assert math.isfinite(r.upper) and r.lower <= 0.5 <= r.upper <= 0.5 * (1 + 1e-3)
