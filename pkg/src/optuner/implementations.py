"""Executable function implementations and an extended-precision reference.

Each evaluable id names a binary64 routine reproduced operation for
operation, so that Python evaluation, the C text in :data:`C_SOURCES` and
the accuracy measurements all describe the same function.
"""

from __future__ import annotations

import math
import threading
from typing import Callable

import mpmath

from .errors import DomainError, NotFoundError
from .expr import HOST_MATH

# order-13 odd minimax polynomial for sin, Horner form in x^2
POLY13_COEFFS = tuple(float.fromhex(h) for h in (
    "0x1.52a851954275cp-33",
    "-0x1.ae00bdd2a86a8p-26",
    "0x1.71dce463cf737p-19",
    "-0x1.a019fce360596p-13",
    "0x1.11111109020a6p-7",
    "-0x1.5555555540916p-3",
    "0x1.ffffffffffdc9p-1",
))


def poly13_sin(x: float) -> float:
    x2 = x * x
    pa = POLY13_COEFFS[0]
    for c in POLY13_COEFFS[1:]:
        pa = c + x2 * pa
    return x * pa


def identity_sin(x: float) -> float:
    return x


def negidentity_cos(x: float) -> float:
    return -x


TABLE_SIZE = 255
_TABLE_HALF = 127


def _table(fn):
    return tuple(fn(float(i - _TABLE_HALF) * math.pi / 127.0) for i in range(TABLE_SIZE))


SIN_TABLE = _table(math.sin)
COS_TABLE = _table(math.cos)


def table_index(x: float) -> int:
    """``(int)(x*127.0/M_PI + 127)`` with C truncation; DomainError if out of bounds."""
    t = x * 127.0 / math.pi + 127.0
    if not -1.0 < t < TABLE_SIZE:
        raise DomainError(f"table lookup out of range for x={x!r}")
    return int(t)


def table_sin(x: float) -> float:
    return SIN_TABLE[table_index(x)]


def table_cos(x: float) -> float:
    return COS_TABLE[table_index(x)]


EVALUABLES: dict[str, tuple[str, Callable[[float], float]]] = {
    "libm:exp": ("exp", HOST_MATH["exp"]),
    "libm:log": ("log", HOST_MATH["log"]),
    "libm:sin": ("sin", HOST_MATH["sin"]),
    "libm:cos": ("cos", HOST_MATH["cos"]),
    "libm:tan": ("tan", HOST_MATH["tan"]),
    "identity:sin": ("sin", identity_sin),
    "negidentity:cos": ("cos", negidentity_cos),
    "poly13:sin": ("sin", poly13_sin),
    "table255:sin": ("sin", table_sin),
    "table255:cos": ("cos", table_cos),
}


def get_evaluable(eid: str) -> Callable[[float], float]:
    try:
        return EVALUABLES[eid][1]
    except KeyError:
        raise NotFoundError(f"no evaluable implementation {eid!r}") from None


def evaluable_function(eid: str) -> str:
    try:
        return EVALUABLES[eid][0]
    except KeyError:
        raise NotFoundError(f"no evaluable implementation {eid!r}") from None


# ---------------------------------------------------------------------------
# C text


def _c_table(name, values):
    body = ",\n  ".join(", ".join(float.hex(v) for v in values[i:i + 4])
                        for i in range(0, len(values), 4))
    return f"static const double {name}[{len(values)}] = {{\n  {body}\n}};\n"


def _c_poly():
    c = POLY13_COEFFS
    lines = [f"  double pa = {float.hex(c[0])};"]
    lines += [f"  pa = {float.hex(k)} + x2 * pa;" for k in c[1:]]
    return ("static inline double optuner_poly13_sin(double x) {\n  double x2 = x * x;\n"
            + "\n".join(lines) + "\n  return x * pa;\n}\n")


def _c_lookup(fn, table):
    return (f"static inline double optuner_table255_{fn}(double x) {{\n"
            f"  int index = (x*127.0/M_PI) + 127;\n  return {table}[index];\n}}\n")


# evaluable id -> (C callee name, supporting definitions)
C_SOURCES: dict[str, tuple[str, str]] = {
    "libm:exp": ("exp", ""),
    "libm:log": ("log", ""),
    "libm:sin": ("sin", ""),
    "libm:cos": ("cos", ""),
    "libm:tan": ("tan", ""),
    "identity:sin": ("optuner_identity_sin",
                     "static inline double optuner_identity_sin(double x) { return x; }\n"),
    "negidentity:cos": ("optuner_negidentity_cos",
                        "static inline double optuner_negidentity_cos(double x) { return -x; }\n"),
    "poly13:sin": ("optuner_poly13_sin", _c_poly()),
    "table255:sin": ("optuner_table255_sin",
                     _c_table("optuner_sin_table", SIN_TABLE) + _c_lookup("sin", "optuner_sin_table")),
    "table255:cos": ("optuner_table255_cos",
                     _c_table("optuner_cos_table", COS_TABLE) + _c_lookup("cos", "optuner_cos_table")),
}


# ---------------------------------------------------------------------------
# extended-precision reference

REFERENCE_PREC = 128
_local = threading.local()


def _ctx():
    ctx = getattr(_local, "ctx", None)
    if ctx is None:
        ctx = _local.ctx = mpmath.MPContext()
        ctx.prec = REFERENCE_PREC
    return ctx


def reference(fn: str, x: float):
    """``fn(x)`` as an mpmath number with 128-bit precision (x taken exactly)."""
    ctx = _ctx()
    v = ctx.mpf(x)
    if fn == "log" and v <= 0:
        raise DomainError(f"log of non-positive value {x!r}")
    return getattr(ctx, fn)(v)


def reference_float(fn: str, x: float) -> float:
    return float(reference(fn, x))


def ulp_error(fn: str, x: float, y: float) -> float:
    """Error of ``y`` as an approximation of ``fn(x)`` in units of ulp(fn(x))."""
    ref = reference(fn, x)
    r = float(ref)
    if r == 0:
        return 0.0 if y == 0 else math.inf
    return float(abs(_ctx().mpf(y) - ref)) / math.ulp(r)
