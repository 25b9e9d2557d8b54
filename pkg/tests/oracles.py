"""Reference computations used by the tests.

Deliberately independent of the package internals: dense sampling instead of
branch and bound, plain enumeration instead of the sweep solver, and a
separate mpmath evaluator for true expression values.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import mpmath
import numpy as np

MP = mpmath.MPContext()
MP.prec = 160


def grid_max(fn, bounds, n=1_000_001):
    """Max of a numpy-vectorized ``fn`` over a dense grid (a lower bound on the true max).

    ``bounds`` is a list of (lo, hi); the grid has about ``n`` points in total.
    """
    d = len(bounds)
    per = max(int(round(n ** (1.0 / d))), 2)
    axes = [np.linspace(lo, hi, per) for lo, hi in bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    vals = fn(*mesh)
    return float(np.max(vals))


def pareto_by_enumeration(costs, terms, C=Fraction(0), conditions=()):
    """Frontier of (cost, error) pairs by enumerating every assignment.

    ``costs[i][j]`` and ``terms[i][j]`` are exact per-candidate cost and error
    contributions.  ``conditions`` holds (site, cand, row, slack) where
    ``row[k][j]`` is site k's contribution if it picks j; the condition
    requires ``sum_k row[k][choice_k] < slack`` whenever site picks cand.
    """
    feasible = set()
    for choice in itertools.product(*[range(len(c)) for c in costs]):
        ok = True
        for site, cand, row, slack in conditions:
            if choice[site] == cand:
                if not sum(row[k][choice[k]] for k in range(len(choice))) < slack:
                    ok = False
                    break
        if not ok:
            continue
        k = sum(costs[i][j] for i, j in enumerate(choice))
        e = C + sum(terms[i][j] for i, j in enumerate(choice))
        feasible.add((k, e))
    front = []
    for k, e in feasible:
        if not any((k2 <= k and e2 <= e) and (k2, e2) != (k, e) for k2, e2 in feasible):
            front.append((k, e))
    return sorted(front)


_MP_FUNCS = {"exp": MP.exp, "log": MP.log, "sin": MP.sin, "cos": MP.cos, "tan": MP.tan,
             "atan": MP.atan}


def true_value(expr, point):
    """Real value of an expression at ``point`` (160-bit mpmath, exact constants)."""
    memo = {}

    def go(e):
        if id(e) in memo:
            return memo[id(e)]
        if e.op == "var":
            v = MP.mpf(point[e.name])
        elif e.op == "const":
            if e.exact:
                v = MP.mpf(e.value)
            elif abs(e.value - math.pi) < 1e-15:
                v = +MP.pi
            elif abs(e.value - math.e) < 1e-15:
                v = MP.e
            else:
                v = MP.mpf(e.value)
        else:
            a = [go(x) for x in e.args]
            op = e.op
            if op == "add":
                v = a[0] + a[1]
            elif op == "sub":
                v = a[0] - a[1]
            elif op == "mul":
                v = a[0] * a[1]
            elif op == "div":
                v = a[0] / a[1]
            elif op == "neg":
                v = -a[0]
            else:
                v = _MP_FUNCS[op](a[0])
        memo[id(e)] = v
        return v

    return go(expr)


def abs_error(expr, point, computed):
    return float(abs(true_value(expr, point) - MP.mpf(computed)))


def spec_standin(function, eps, delta, sign):
    """A binary64 routine erring by (almost) the declared (eps, delta), in direction ``sign``.

    The relative part is kept a hair under ``eps`` so that the final
    rounding to binary64 cannot push it past the declared bound.
    """
    f = _MP_FUNCS[function]
    rel = max(eps - 2.0**-52, 0.0) if eps >= 2.0**-52 else 0.0

    def impl(x):
        v = f(MP.mpf(x))
        return float(v * (1 + sign * rel) + sign * delta * 0.999)

    return impl
