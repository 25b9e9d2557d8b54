"""Simplifying constructors and derivative rules over :class:`Expr`.

Only exact simplifications are applied (identities with 0 and 1, folding of
constants whose result is exactly representable), so a simplified
expression denotes the same real function as the unsimplified one.
"""

from __future__ import annotations

from fractions import Fraction

from .expr import Expr

ZERO = Expr.const(0.0)
ONE = Expr.const(1.0)
TWO = Expr.const(2.0)


def const(v: float) -> Expr:
    return Expr.const(float(v))


def _is(e: Expr, v: float) -> bool:
    return e.op == "const" and e.value == v and e.exact


def _fold(op: str, a: Expr, b: Expr) -> Expr | None:
    if not (a.op == "const" and b.op == "const" and a.exact and b.exact):
        return None
    x, y = Fraction(a.value), Fraction(b.value)
    if op == "add":
        r = x + y
    elif op == "sub":
        r = x - y
    elif op == "mul":
        r = x * y
    else:
        if y == 0:
            return None
        r = x / y
    f = float(r)
    return Expr.const(f) if Fraction(f) == r else None


def add(a: Expr, b: Expr) -> Expr:
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    return _fold("add", a, b) or Expr.call("add", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is(b, 0):
        return a
    if _is(a, 0):
        return neg(b)
    if a is b:
        return ZERO
    return _fold("sub", a, b) or Expr.call("sub", a, b)


def neg(a: Expr) -> Expr:
    if a.op == "neg":
        return a.args[0]
    if a.op == "const":
        return Expr.const(-a.value, a.exact) if a.value != 0 else a
    return Expr.call("neg", a)


def mul(a: Expr, b: Expr) -> Expr:
    if _is(a, 0) or _is(b, 0):
        return ZERO
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    if _is(a, -1):
        return neg(b)
    if _is(b, -1):
        return neg(a)
    if a.op == "neg" and b.op == "neg":
        return mul(a.args[0], b.args[0])
    if a.op == "neg":
        return neg(mul(a.args[0], b))
    if b.op == "neg":
        return neg(mul(a, b.args[0]))
    if a is b:
        return sqr(a)
    return _fold("mul", a, b) or Expr.call("mul", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is(a, 0):
        return ZERO
    if _is(b, 1):
        return a
    if a.op == "neg":
        return neg(div(a.args[0], b))
    return _fold("div", a, b) or Expr.call("div", a, b)


def sqr(a: Expr) -> Expr:
    if a.op == "neg":
        a = a.args[0]
    if a.op == "const" and a.exact:
        folded = _fold("mul", a, a)
        if folded is not None:
            return folded
    return Expr.call("sqr", a)


def absolute(a: Expr) -> Expr:
    if a.op in ("neg", "abs"):
        return absolute(a.args[0]) if a.op == "neg" else a
    if a.op == "const":
        return Expr.const(abs(a.value), a.exact)
    if a.op in ("exp", "sqr"):
        return a
    return Expr.call("abs", a)


def call(op: str, *args: Expr) -> Expr:
    """Simplifying dispatch on operator name."""
    if op == "add":
        return add(*args)
    if op == "sub":
        return sub(*args)
    if op == "mul":
        return mul(*args)
    if op == "div":
        return div(*args)
    if op == "neg":
        return neg(*args)
    if op == "sqr":
        return sqr(*args)
    if op == "abs":
        return absolute(*args)
    return Expr.call(op, *args)


def partials(e: Expr) -> list[Expr]:
    """Partial derivatives of the operator at ``e`` w.r.t. each argument.

    The result is expressed in terms of ``e``'s arguments (and ``e`` itself,
    e.g. ``exp``'s derivative is ``e``).
    """
    op, args = e.op, e.args
    if op == "add":
        return [ONE, ONE]
    if op == "sub":
        return [ONE, const(-1.0)]
    if op == "mul":
        return [args[1], args[0]]
    if op == "div":
        a, b = args
        return [div(ONE, b), neg(div(e, b))]
    if op == "neg":
        return [const(-1.0)]
    a = args[0]
    if op == "exp":
        return [e]
    if op == "log":
        return [div(ONE, a)]
    if op == "sin":
        return [Expr.call("cos", a)]
    if op == "cos":
        return [neg(Expr.call("sin", a))]
    if op == "tan":
        return [add(ONE, sqr(e))]
    if op == "atan":
        return [div(ONE, add(ONE, sqr(a)))]
    if op == "sqr":
        return [mul(TWO, a)]
    if op == "abs":
        raise ValueError("abs is not differentiable symbolically")
    raise ValueError(f"no derivative rule for {op}")


def derivative(e: Expr, var: str) -> Expr:
    """Symbolic derivative of ``e`` with respect to the variable ``var``."""
    memo: dict[int, Expr] = {}

    def d(x: Expr) -> Expr:
        k = id(x)
        if k in memo:
            return memo[k]
        if x.op == "var":
            r = ONE if x.name == var else ZERO
        elif x.op == "const":
            r = ZERO
        else:
            r = ZERO
            for a, p in zip(x.args, partials(x)):
                r = add(r, mul(p, d(a)))
        memo[k] = r
        return r

    return d(e)


def substitute(e: Expr, mapping: dict[str, Expr]) -> Expr:
    """Replace variables by expressions (rebuilding with simplification)."""
    memo: dict[int, Expr] = {}

    def go(x: Expr) -> Expr:
        k = id(x)
        if k not in memo:
            if x.op == "var":
                memo[k] = mapping.get(x.name, x)
            elif x.op == "const":
                memo[k] = x
            else:
                memo[k] = call(x.op, *[go(a) for a in x.args])
        return memo[k]

    return go(e)
