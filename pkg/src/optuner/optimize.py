"""Sound interval evaluation and branch-and-bound global maximization.

The maximizer keeps a best-first queue of boxes ordered by their certified
upper bound.  Each box is bounded by the intersection of the natural interval
extension and the mean-value form (using interval gradients computed in
forward mode), and the lower bound comes from interval evaluation at box
midpoints, so both ends of the returned bracket are certified.  Dimensions
in which the gradient has a fixed sign are collapsed onto the maximizing face
before bisection.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import symbolic as sym
from .errors import BudgetExhausted, DomainError
from .expr import Expr, _postorder
from .intervals import IA, widen_inexact


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __contains__(self, x) -> bool:
        if isinstance(x, Interval):
            return self.lo <= x.lo and x.hi <= self.hi
        return self.lo <= x <= self.hi

    def __iter__(self):
        yield self.lo
        yield self.hi


Box = Mapping[str, Interval]


def make_box(bounds) -> dict[str, Interval]:
    """Build a box from ``{name: (lo, hi)}``, InputSpecs or Intervals."""
    if isinstance(bounds, Mapping):
        return {k: v if isinstance(v, Interval) else Interval(*v) for k, v in bounds.items()}
    return {s.name: Interval(s.lo, s.hi) for s in bounds}


@dataclass(frozen=True)
class OptimizerConfig:
    rel_tol: float = 1e-4
    abs_tol: float = 1e-14
    max_subdivisions: int = 10**6
    batch: int = 128

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be positive")


DEFAULT_CONFIG = OptimizerConfig()


@dataclass(frozen=True)
class MaxResult:
    """Certified bracket ``lower <= max f <= upper`` over a box."""

    upper: float
    lower: float
    loose: bool
    subdivisions: int
    argmax: dict[str, float] | None = None

    def __iter__(self):
        yield self.upper
        yield self.lower


# ---------------------------------------------------------------------------
# compiled evaluation

class Tape:
    """Post-order instruction list for vectorized evaluation of an Expr DAG."""

    def __init__(self, expr: Expr, variables=None):
        self.expr = expr
        order = _postorder(expr)
        self.variables = list(variables) if variables is not None else expr.free_variables()
        col = {v: i for i, v in enumerate(self.variables)}
        pos = {id(e): i for i, e in enumerate(order)}
        self.ops = []
        for e in order:
            if e.op == "var":
                self.ops.append(("var", col[e.name], None))
            elif e.op == "const":
                self.ops.append(("const", None, e))
            else:
                self.ops.append((e.op, tuple(pos[id(a)] for a in e.args), None))

    def run(self, lo: np.ndarray, hi: np.ndarray, grad: bool = False):
        """Evaluate over boxes ``lo[B, d]``/``hi[B, d]``.

        Returns the value enclosure (shape ``[B]``) and, with ``grad``, the
        gradient enclosure (shape ``[B, d]``).
        """
        B, d = lo.shape
        vals: list[IA] = []
        grads: list[IA | None] = []
        for op, arg, payload in self.ops:
            g = None
            if op == "var":
                v = IA(lo[:, arg], hi[:, arg])
                if grad:
                    e = np.zeros((B, d))
                    e[:, arg] = 1.0
                    g = IA(e, e)
            elif op == "const":
                c = payload.value
                v = IA.point(np.full(B, c)) if payload.exact else widen_inexact(np.full(B, c))
                if grad:
                    g = None
            else:
                a = vals[arg[0]]
                if len(arg) == 2:
                    b = vals[arg[1]]
                    if op == "add":
                        v = a + b
                    elif op == "sub":
                        v = a - b
                    elif op == "mul":
                        v = a * b
                    else:
                        v = a / b
                else:
                    v = a.apply(op)
                if grad:
                    g = _grad_rule(op, v, [vals[i] for i in arg], [grads[i] for i in arg])
            vals.append(v)
            grads.append(g)
        out = vals[-1]
        if not grad:
            return out, None
        g = grads[-1]
        if g is None:
            g = IA.zeros((B, d))
        return out, g


def _col(x: IA) -> IA:
    return IA(x.lo[:, None], x.hi[:, None])


def _grad_rule(op, v, args, gs):
    """Forward-mode interval derivative; ``None`` means identically zero."""
    if op in ("add", "sub"):
        ga, gb = gs
        if gb is None:
            return ga
        if ga is None:
            return gb if op == "add" else -gb
        return ga + gb if op == "add" else ga - gb
    if op == "mul":
        (a, b), (ga, gb) = args, gs
        terms = []
        if ga is not None:
            terms.append(ga * _col(b))
        if gb is not None:
            terms.append(_col(a) * gb)
        if not terms:
            return None
        return terms[0] if len(terms) == 1 else terms[0] + terms[1]
    if op == "div":
        (a, b), (ga, gb) = args, gs
        if ga is None and gb is None:
            return None
        num = ga if ga is not None else None
        if gb is not None:
            t = _col(v) * gb
            num = -t if num is None else num - t
        return num / _col(b)
    (a,), (ga,) = args, gs
    if ga is None:
        return None
    if op == "neg":
        return -ga
    if op == "exp":
        k = v
    elif op == "log":
        return ga / _col(a)
    elif op == "sin":
        k = a.cos()
    elif op == "cos":
        k = -a.sin()
    elif op == "tan":
        k = v.sqr() + 1.0
    elif op == "atan":
        return ga / _col(a.sqr() + 1.0)
    elif op == "abs":
        k = a.sign()
    elif op == "sqr":
        k = a * 2.0
    else:
        raise ValueError(f"no gradient rule for {op}")
    return _col(k) * ga


_TAPES: dict[tuple[int, tuple], Tape] = {}


def _tape(f: Expr, variables) -> Tape:
    key = (id(f), tuple(variables))
    t = _TAPES.get(key)
    if t is None or t.expr is not f:
        t = Tape(f, variables)
        if len(_TAPES) > 4096:
            _TAPES.clear()
        _TAPES[key] = t
    return t


def _box_arrays(f: Expr, box: Box):
    variables = f.free_variables()
    missing = [v for v in variables if v not in box]
    if missing:
        raise ValueError(f"box does not cover variables {missing}")
    lo = np.array([[box[v].lo for v in variables]], dtype=np.float64).reshape(1, len(variables))
    hi = np.array([[box[v].hi for v in variables]], dtype=np.float64).reshape(1, len(variables))
    return variables, lo, hi


def interval_eval(f: Expr, box: Box) -> Interval:
    """Outward-rounded enclosure of ``{f(x) : x in box}``.

    Raises :class:`DomainError` if the enclosure is invalid (a pole or log
    argument touching zero inside the box, possibly due to overestimation).
    """
    variables, lo, hi = _box_arrays(f, box)
    v, _ = _tape(f, variables).run(lo, hi)
    if v.invalid[0]:
        raise DomainError(f"domain violation evaluating {f!r} over the box")
    return Interval(float(v.lo[0]), float(v.hi[0]))


def _enclose(tape: Tape, lo, hi):
    """Bounds for boxes: (upper bound, value enclosure, gradient, midpoint enclosure)."""
    mid = lo + (hi - lo) / 2
    mid = np.where(hi == lo, lo, mid)
    v, g = tape.run(lo, hi, grad=True)
    vm, _ = tape.run(mid, mid)
    with np.errstate(invalid="ignore", over="ignore"):
        dx = IA(lo - mid, hi - mid)
        # scalings above are exact only up to rounding; widen
        dx = IA(np.nextafter(dx.lo, -np.inf), np.nextafter(dx.hi, np.inf))
        mv = IA(vm.lo, vm.hi)
        for j in range(lo.shape[1]):
            mv = mv + g[:, j] * dx[:, j]
    enc = v.intersect(mv)
    ub = np.where(enc.invalid, np.inf, enc.hi)
    return ub, enc, g, mid, vm


def maximize(f: Expr, box: Box, cfg: OptimizerConfig | None = None,
             strict_budget: bool = False) -> MaxResult:
    """Certified bracket on ``max f`` over ``box`` by branch and bound.

    Stops when ``upper - lower <= max(abs_tol, rel_tol * |upper|)``.  When the
    subdivision budget runs out the current (still sound) upper bound is
    returned with ``loose=True``, or :class:`BudgetExhausted` is raised if
    ``strict_budget``.
    """
    cfg = cfg or DEFAULT_CONFIG
    variables, lo0, hi0 = _box_arrays(f, box)
    tape = _tape(f, variables)
    d = len(variables)
    width0 = hi0[0] - lo0[0]
    tiny = np.maximum(width0 * 1e-12, 1e-300)

    best_lower = -math.inf
    argmax = None
    terminal_upper = -math.inf
    counter = itertools.count()
    heap: list = []

    def absorb(lo, hi):
        nonlocal best_lower, argmax, terminal_upper
        ub, enc, g, mid, vm = _enclose(tape, lo, hi)
        bad_point = vm.invalid
        if bad_point.any():
            i = int(np.argmax(bad_point))
            pt = {v: float(mid[i, j]) for j, v in enumerate(variables)}
            raise DomainError(f"domain violation at {pt} while bounding {f!r}")
        k = int(np.argmax(vm.lo))
        if vm.lo[k] > best_lower:
            best_lower = float(vm.lo[k])
            argmax = {v: float(mid[k, j]) for j, v in enumerate(variables)}
        degenerate = np.all(hi == lo, axis=1)
        for i in range(lo.shape[0]):
            if degenerate[i]:
                terminal_upper = max(terminal_upper, float(vm.hi[i]))
                continue
            if not math.isfinite(ub[i]) and enc.invalid[i] and np.all(hi[i] - lo[i] <= tiny):
                pt = {v: float(mid[i, j]) for j, v in enumerate(variables)}
                raise DomainError(f"domain violation near {pt} while bounding {f!r}")
            if ub[i] > best_lower:
                heapq.heappush(heap, (-float(ub[i]), next(counter), lo[i], hi[i], g.lo[i], g.hi[i]))

    absorb(lo0.copy(), hi0.copy())
    subdivisions = 0
    loose = False
    while heap:
        upper = max(best_lower, -heap[0][0], terminal_upper)
        # an infinite upper bound would satisfy the relative test trivially
        if math.isfinite(upper) and upper - best_lower <= max(cfg.abs_tol, cfg.rel_tol * abs(upper)):
            break
        if subdivisions >= cfg.max_subdivisions:
            loose = True
            break
        los, his = [], []
        while heap and len(los) < 2 * cfg.batch:
            nub, _, lo, hi, glo, ghi = heapq.heappop(heap)
            if -nub <= best_lower:
                heap.clear()
                break
            lo, hi = lo.copy(), hi.copy()
            # monotone dimensions: move onto the maximizing face
            inc = glo >= 0
            dec = ghi <= 0
            lo = np.where(inc & ~dec, hi, lo)
            hi = np.where(dec & ~inc, lo, hi)
            both = inc & dec  # gradient identically zero: f is flat along it
            hi = np.where(both, lo, hi)
            w = hi - lo
            if np.all(w == 0):
                los.append(lo)
                his.append(hi)
                continue
            j = int(np.argmax(w))
            m = lo[j] + w[j] / 2
            lo2, hi1 = lo.copy(), hi.copy()
            hi1[j] = m
            lo2[j] = m
            los += [lo, lo2]
            his += [hi1, hi]
            subdivisions += 1
        if los:
            absorb(np.array(los), np.array(his))
    if heap:
        upper = max(best_lower, -heap[0][0], terminal_upper)
    else:
        upper = max(best_lower, terminal_upper)
    if loose and strict_budget:
        raise BudgetExhausted(f"subdivision budget exhausted bounding {f!r}")
    return MaxResult(float(upper), float(best_lower), loose, subdivisions, argmax)


def maximize_abs(f: Expr, box: Box, cfg: OptimizerConfig | None = None) -> MaxResult:
    """Certified bracket on ``max |f|`` over ``box``."""
    return maximize(sym.absolute(f), box, cfg)


def range_of(f: Expr, box: Box, cfg: OptimizerConfig | None = None) -> Interval:
    """Sound enclosure ``[a1, a2]`` of the image of ``f``, tightened by B&B."""
    hi = maximize(f, box, cfg)
    lo = maximize(sym.neg(f), box, cfg)
    return Interval(-lo.upper, hi.upper)
