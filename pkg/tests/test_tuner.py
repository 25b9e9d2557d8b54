import csv
import io
import json
import math
from fractions import Fraction

import pytest

from oracles import pareto_by_enumeration
from optuner import (Catalog, ImplSpec, InfeasibleError, build_problem, evaluate_model,
                     load_benchmark, pareto_filter, tune)
from optuner.tuner import Configuration, program_text

U = 2.0**-52


def cfg(cost, err):
    return Configuration(0, {}, err, err, cost)


def pairs(points):
    return [(p.cost, p.verified_error) for p in points]


def test_filter_drops_non_monotone():
    assert pairs(pareto_filter([cfg(1, 8), cfg(2, 9), cfg(3, 4)])) == [(1, 8), (3, 4)]


def test_filter_identity_on_monotone():
    pts = [cfg(1, 8), cfg(2, 5), cfg(3, 4)]
    assert pairs(pareto_filter(pts)) == pairs(pts)


def test_filter_equal_costs():
    assert pairs(pareto_filter([cfg(2, 5), cfg(2, 3), cfg(1, 9)])) == [(1, 9), (2, 3)]


def test_reduced_domain_dropped_for_full_circle(povprog, catalog):
    _, inputs, seq = povprog
    prob = build_problem(seq, inputs, catalog)
    dropped = {(site, ident) for site, ident, _ in prob.dropped}
    assert ("sin1", "vdt_reduced") in dropped and ("cos2", "vdt_reduced") in dropped
    for i, specs in enumerate(prob.candidates):
        assert "vdt_reduced" not in {s.id for s in specs}


def test_slack_of_tight_argument(povprog):
    _, inputs, seq = povprog
    inputs = [i if i.name not in ("theta", "phi") else type(i)(i.name, -0.7, 0.7) for i in inputs]
    narrow = Catalog([ImplSpec("sin", "lib", -1.8e308, 1.8e308, U, 0, 5),
                      ImplSpec("cos", "lib", -1.8e308, 1.8e308, U, 0, 5),
                      ImplSpec("sin", "narrow", -0.785, 0.785, U, 0, 1)])
    prob = build_problem(seq, inputs, narrow)
    slacks = [float(rc.slack) for rc in prob.constraints]
    assert len(slacks) == 2
    assert all(s == pytest.approx(0.085) for s in slacks)


def test_exp_candidates(catalog):
    from optuner import linearize, parse_expression
    e, inputs = parse_expression("(FPCore (x) :pre (<= 0 x 1) (exp x))")
    prob = build_problem(linearize(e), inputs, catalog)
    ids = {s.id for s in prob.candidates[0]}
    assert {"crlibm", "glibc", "openlibm", "amd_libm", "vdt"} <= ids
    # the overflow bound at 709.78 is far from [0, 1]
    assert all(rc.slack > 700 for rc in prob.constraints)
    assert prob.dropped == []


def test_single_site_curve_is_site_pareto_set(catalog):
    report = tune("(FPCore (x) :pre (<= 0 x 1) (exp x))", catalog)
    A, B, C = report.model.A[0], report.model.B[0], report.model.constant
    specs = catalog.for_function("exp")
    oracle = pareto_by_enumeration(
        [[Fraction(s.cost) for s in specs]],
        [[Fraction(A) * Fraction(s.eps) + Fraction(B) * Fraction(s.delta) for s in specs]],
        Fraction(C))
    assert [(p.cost, p.model_error) for p in report.points] == [
        (float(k), pytest.approx(float(e), rel=1e-12)) for k, e in oracle]


def test_no_tunable_call():
    report = tune("(FPCore (x y) :pre (and (<= 0 x 1) (<= 0 y 1)) (+ x y))")
    assert len(report.points) == 1
    p = report.points[0]
    assert p.selection == {} and p.cost == 0
    assert p.model_error == report.model.constant


def test_povprog_curve(povprog_report):
    pts = povprog_report.points
    assert len(pts) >= 5
    costs = [p.cost for p in pts]
    errs = [p.verified_error for p in pts]
    assert all(a < b for a, b in zip(costs, costs[1:]))
    assert all(a > b for a, b in zip(errs, errs[1:]))
    top = pts[-1]
    assert set(top.names().values()) == {"crlibm"} and top.cost == pytest.approx(139.24)


def test_glibc_configuration(povprog, povprog_report, catalog):
    model = povprog_report.model
    glibc = {l: catalog.lookup(l[:3], "glibc") for l in model.labels}
    assert sum(s.cost for s in glibc.values()) == pytest.approx(35.20)
    expected = sum(a * U for a in model.A) + model.constant
    assert evaluate_model(model, glibc) == pytest.approx(expected, rel=1e-9)


def test_report_format(povprog_report):
    data = json.loads(povprog_report.to_json())
    assert list(data) == ["expression", "box", "model", "points"]
    assert list(data["model"]) == ["coefficients", "constant"]
    assert list(data["points"][0]) == ["id", "selection", "model_error", "verified_error",
                                       "cost", "status"]
    assert data["box"]["theta"] == [-math.pi, math.pi]
    rows = list(csv.DictReader(io.StringIO(povprog_report.to_csv())))
    assert [(int(r["id"]), float(r["cost"]), float(r["verified_error"])) for r in rows] == [
        (p.id, p.cost, p.verified_error) for p in povprog_report.points]


def test_restricted_choices_stay_in_domain(povprog_report):
    for report_pt in povprog_report.points:
        for label, spec in report_pt.selection.items():
            if spec.unrestricted:
                continue
            # every argument here is an input variable in [-pi, pi]
            assert spec.domain_lo < -math.pi and math.pi < spec.domain_hi


def test_deterministic():
    text = load_benchmark("expsin")
    assert tune(text).to_json() == tune(text).to_json()


def test_threads_do_not_change_result():
    text = load_benchmark("logexp")
    assert tune(text, threads=4).to_json() == tune(text).to_json()


def test_logexp_cheap_end():
    report = tune(load_benchmark("logexp"))
    cheapest = report.points[0].names()
    assert cheapest == {"exp1": "vdt", "log1": "vdt"}


def test_max_error_filter():
    report = tune(load_benchmark("logexp"), max_error=3e-15)
    assert report.points and all(p.verified_error <= 3e-15 for p in report.points)


def test_infeasible_site():
    only_narrow = Catalog([ImplSpec("sin", "narrow", -0.5, 0.5, U, 0, 1)])
    with pytest.raises(InfeasibleError):
        tune("(FPCore (x) :pre (<= -1 x 1) (sin x))", only_narrow)


def test_program_text_roundtrip(povprog):
    from optuner import parse_expression
    expr, inputs, _ = povprog
    e2, in2 = parse_expression(program_text(expr, inputs))
    assert e2 is expr and in2 == inputs


@pytest.mark.parametrize("sign", [1, -1])
def test_standins_respect_verified_bounds(povprog_report, sign):
    import random

    from oracles import MP, spec_standin, true_value
    from optuner import evaluate, linearize, parse_expression
    expr, inputs = parse_expression(povprog_report.expression)
    seq = linearize(expr, [i.name for i in inputs])
    rng = random.Random(5)
    pts = [{i.name: rng.uniform(i.lo, i.hi) for i in inputs} for _ in range(300)]
    truth = [true_value(expr, p) for p in pts]
    checked = 0
    for cfg in povprog_report.points:
        if all(s.evaluable for s in cfg.selection.values()):
            continue
        impl = {l: (s.__call__ if s.evaluable else spec_standin(s.function, s.eps, s.delta, sign))
                for l, s in cfg.selection.items()}
        worst = max(float(abs(t - MP.mpf(evaluate(seq, p, impl)))) for p, t in zip(pts, truth))
        assert worst <= cfg.verified_error
        checked += 1
    assert checked > 0
