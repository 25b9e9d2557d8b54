"""Linear error models, Lagrange remainder bounds and configuration checks.

Every node of a :class:`CallSequence` is modeled as
``x~_k = f_k(args)(1 + e_k) + d_k`` with ``|e_k| <= eps_k`` and
``|d_k| <= delta_k``.  At ``e = d = 0`` the derivative of the result with
respect to ``e_k`` is ``x_k * dx_N/dx_k`` and with respect to ``d_k`` it is
``dx_N/dx_k``; maximizing their magnitudes over the input box gives the
linear coefficients.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping, Sequence

import numpy as np

from . import symbolic as sym
from .errors import DomainError
from .expr import CallSequence, Expr, InputSpec
from .intervals import IA, widen_inexact
from .optimize import (DEFAULT_CONFIG, Interval, OptimizerConfig, make_box, maximize,
                       maximize_abs, range_of)

# Rounding constants of operators that are not tuned.  Arithmetic is charged
# one ulp (2^-52) rather than half an ulp; 2^-1074 is the smallest subnormal.
EPS_BASE = 2.0**-52
DELTA_BASE = 2.0**-1074
FIXED_ERRORS: dict[str, tuple[float, float]] = {
    "add": (EPS_BASE, DELTA_BASE),
    "sub": (EPS_BASE, DELTA_BASE),
    "mul": (EPS_BASE, DELTA_BASE),
    "div": (EPS_BASE, DELTA_BASE),
    "atan": (2.0**-52, DELTA_BASE),
    "neg": (0.0, 0.0),
    "var": (0.0, 0.0),
}


def node_base_error(seq: CallSequence, k: int) -> tuple[float, float]:
    """(eps, delta) of a non-tunable node."""
    node = seq.nodes[k]
    if node.op == "const":
        return (0.0, 0.0) if node.exact else (EPS_BASE, DELTA_BASE)
    return FIXED_ERRORS[node.op]


def _round_up(q: Fraction) -> float:
    f = float(q)
    if Fraction(f) < q:
        f = math.nextafter(f, math.inf)
    return f


# ---------------------------------------------------------------------------
# symbolic derivatives


class _Analysis:
    """Per-sequence cache of true-value expressions and adjoints."""

    def __init__(self, seq: CallSequence):
        self.seq = seq
        self.values = [n.expr for n in seq.nodes]
        self._adjoints: dict[int, list[Expr | None]] = {}

    def adjoints(self, root: int) -> list[Expr | None]:
        """``d x_root / d x_k`` for every node ``k <= root`` (None if independent)."""
        if root in self._adjoints:
            return self._adjoints[root]
        seq = self.seq
        adj: list[Expr | None] = [None] * (root + 1)
        adj[root] = sym.ONE
        for k in range(root, -1, -1):
            if adj[k] is None:
                continue
            node = seq.nodes[k]
            if not node.args or node.op == "var":
                continue
            for arg, p in zip(node.args, sym.partials(node.expr)):
                if isinstance(arg, str):
                    continue
                term = sym.mul(adj[k], p)
                adj[arg] = term if adj[arg] is None else sym.add(adj[arg], term)
        self._adjoints[root] = adj
        return adj


_CACHE: dict[int, _Analysis] = {}


def _analysis(seq: CallSequence) -> _Analysis:
    a = _CACHE.get(id(seq))
    if a is None or a.seq is not seq:
        if len(_CACHE) > 256:
            _CACHE.clear()
        a = _CACHE[id(seq)] = _Analysis(seq)
    return a


def differentiate(seq: CallSequence, k: int, root: int | None = None) -> tuple[Expr, Expr]:
    """True value ``v_k`` of node ``k`` and ``d x_root / d x_k`` (root defaults to N)."""
    root = seq.result if root is None else root
    if not 0 <= k <= root:
        raise ValueError(f"node {k} is not upstream of node {root}")
    an = _analysis(seq)
    adj = an.adjoints(root)[k]
    return an.values[k], adj if adj is not None else sym.ZERO


def eps_integrand(seq: CallSequence, k: int, root: int | None = None) -> Expr:
    v, a = differentiate(seq, k, root)
    return sym.mul(v, a)


# ---------------------------------------------------------------------------
# the model


@dataclass(frozen=True)
class ArgumentRow:
    """Error coefficients of an intermediate node w.r.t. every tunable site."""

    node: int
    A: dict[int, float]
    B: dict[int, float]
    constant: float


@dataclass(frozen=True)
class ErrorModel:
    sites: tuple[int, ...]
    labels: tuple[str, ...]
    A: tuple[float, ...]
    B: tuple[float, ...]
    constant: float
    kind: str = "absolute"
    scale: float = 1.0
    rows: Mapping[int, ArgumentRow] = field(default_factory=dict)
    fixed: Mapping[int, tuple[float, float]] = field(default_factory=dict)
    loose: bool = False

    def coefficient(self, site: int | str) -> tuple[float, float]:
        i = self._pos(site)
        return self.A[i], self.B[i]

    def _pos(self, site: int | str) -> int:
        if isinstance(site, str):
            return self.labels.index(site)
        return self.sites.index(site)

    def __str__(self):
        terms = [f"{a:.3g}*eps[{l}]" for a, l in zip(self.A, self.labels)]
        terms += [f"{b:.3g}*delta[{l}]" for b, l in zip(self.B, self.labels)]
        return " + ".join(terms + [f"{self.constant:.3g}"])


def _run_jobs(fn, jobs, threads):
    if threads and threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(fn, jobs))
    return [fn(j) for j in jobs]


def check_domains(seq: CallSequence, inputs: Sequence[InputSpec],
                  cfg: OptimizerConfig | None = None) -> None:
    """Raise DomainError unless every partial operation is defined on the box."""
    box = make_box(inputs)
    for k, node in enumerate(seq.nodes):
        if node.op not in ("log", "div", "tan"):
            continue
        arg = node.args[-1] if node.op == "div" else node.args[0]
        e = seq.arg_expr(arg)
        try:
            r = range_of(e, box, cfg)
        except DomainError as exc:
            raise DomainError(f"node x{k} ({node.op}): {exc}") from None
        if node.op == "log" and not r.lo > 0:
            raise DomainError(f"log argument of x{k} may be non-positive: range {r}")
        if node.op == "div" and r.lo <= 0 <= r.hi:
            raise DomainError(f"divisor of x{k} may be zero: range {r}")
        if node.op == "tan" and (r.hi - r.lo >= math.pi or
                                 math.floor((r.hi - math.pi / 2) / math.pi) >=
                                 math.ceil((r.lo - math.pi / 2) / math.pi)):
            raise DomainError(f"tan argument of x{k} may cross a pole: range {r}")


def build_error_model(seq: CallSequence, inputs: Sequence[InputSpec],
                      cfg: OptimizerConfig | None = None, relative: bool = False,
                      threads: int | None = None,
                      row_nodes: Sequence[int] | None = None) -> ErrorModel:
    """Linear error model of ``seq`` over the input box.

    ``row_nodes`` selects intermediate nodes whose own error coefficients are
    tabulated (defaults to every non-input argument of a tunable site).
    """
    cfg = cfg or DEFAULT_CONFIG
    box = make_box(inputs)
    check_domains(seq, inputs, cfg)
    N = seq.result

    def coeffs(root: int, k: int) -> tuple[float, float, bool]:
        v, a = differentiate(seq, k, root)
        ra = maximize_abs(sym.mul(v, a), box, cfg)
        rb = maximize_abs(a, box, cfg)
        return ra.upper, rb.upper, ra.loose or rb.loose

    fixed_nodes = [k for k in range(N + 1)
                   if not seq.nodes[k].tunable and any(node_base_error(seq, k))]
    jobs = [(N, k) for k in seq.sites] + [(N, k) for k in fixed_nodes]
    if row_nodes is None:
        row_nodes = sorted({a for s in seq.sites for a in seq.nodes[s].args if isinstance(a, int)})
    for r in row_nodes:
        jobs += [(r, k) for k in seq.sites if k <= r]
        jobs += [(r, k) for k in fixed_nodes if k <= r]
    results = dict(zip(jobs, _run_jobs(lambda j: coeffs(*j), jobs, threads)))
    loose = any(res[2] for res in results.values())

    def constant(root: int) -> float:
        total = Fraction(0)
        for k in fixed_nodes:
            if k > root:
                continue
            e, d = node_base_error(seq, k)
            a, b, _ = results[(root, k)]
            total += Fraction(a) * Fraction(e) + Fraction(b) * Fraction(d)
        return _round_up(total)

    A = [results[(N, k)][0] for k in seq.sites]
    B = [results[(N, k)][1] for k in seq.sites]
    C = constant(N)
    rows = {}
    for r in row_nodes:
        rows[r] = ArgumentRow(r, {k: results[(r, k)][0] for k in seq.sites if k <= r},
                              {k: results[(r, k)][1] for k in seq.sites if k <= r}, constant(r))
    scale = 1.0
    kind = "absolute"
    if relative:
        res = maximize(sym.neg(sym.absolute(seq.nodes[N].expr)), box, cfg)
        scale = -res.upper
        if not scale > 0:
            raise DomainError("result may be zero on the input box; only absolute error is available")
        kind = "relative"
        A = [_round_up(Fraction(a) / Fraction(scale)) for a in A]
        B = [_round_up(Fraction(b) / Fraction(scale)) for b in B]
        C = _round_up(Fraction(C) / Fraction(scale))
    fixed = {k: results[(N, k)][:2] for k in fixed_nodes}
    return ErrorModel(tuple(seq.sites), tuple(seq.labels), tuple(A), tuple(B), C,
                      kind, scale, rows, fixed, loose)


def _eps_delta(value: Any) -> tuple[float, float]:
    if isinstance(value, tuple):
        return float(value[0]), float(value[1])
    return float(value.eps), float(value.delta)


def evaluate_model(model: ErrorModel, assignment: Mapping[int | str, Any]) -> float:
    """``sum A_n eps_n + sum B_n delta_n + C`` for a per-site (eps, delta) assignment.

    Values may be ``(eps, delta)`` tuples or objects with ``eps``/``delta``
    attributes (ImplSpec).  Computed exactly and rounded to nearest.
    """
    per_site: dict[int, tuple[float, float]] = {}
    for key, val in assignment.items():
        try:
            per_site[model._pos(key)] = _eps_delta(val)
        except ValueError:
            raise KeyError(f"unknown site {key!r}") from None
    missing = [model.labels[i] for i in range(len(model.sites)) if i not in per_site]
    if missing:
        raise KeyError(f"assignment misses sites {missing}")
    total = Fraction(model.constant)
    for i in range(len(model.sites)):
        e, d = per_site[i]
        total += Fraction(model.A[i]) * Fraction(e) + Fraction(model.B[i]) * Fraction(d)
    return float(total)


# ---------------------------------------------------------------------------
# second order: interval Hessians of the perturbed program


def _outer(u: IA, v: IA) -> IA:
    return IA(u.lo[:, None], u.hi[:, None]) * IA(v.lo[None, :], v.hi[None, :])


def _addz(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def _scale(x, k: IA):
    return None if x is None else x * k


def _unary_derivs(op: str, a: IA, v: IA) -> tuple[IA, IA]:
    if op == "exp":
        return v, v
    if op == "log":
        r = 1.0 / a
        return r, -(r.sqr())
    if op == "sin":
        return a.cos(), -v
    if op == "cos":
        return -a.sin(), -v
    if op == "tan":
        d1 = v.sqr() + 1.0
        return d1, (v * 2.0) * d1
    if op == "atan":
        q = a.sqr() + 1.0
        return 1.0 / q, (a * -2.0) / q.sqr()
    raise ValueError(f"no second derivative rule for {op}")


def _node_errors(seq: CallSequence, config: Mapping[int, tuple[float, float]]):
    errs = []
    for k, node in enumerate(seq.nodes):
        errs.append(config[k] if node.tunable else node_base_error(seq, k))
    return errs


def _hessians(seq: CallSequence, inputs: Sequence[InputSpec], errs):
    """Interval value and Hessian (w.r.t. all perturbations) of every node.

    Perturbations range over their full boxes, so the Hessian enclosure is
    valid at every intermediate point of the Lagrange remainder.
    """
    box = make_box(inputs)
    index = []
    for k, (e, d) in enumerate(errs):
        if e > 0:
            index.append((k, "e", e))
        if d > 0:
            index.append((k, "d", d))
    m = len(index)
    pos = {(k, t): i for i, (k, t, _) in enumerate(index)}
    radius = np.array([r for _, _, r in index])
    V: list[IA] = []
    G: list[IA | None] = []
    H: list[IA | None] = []
    for k, node in enumerate(seq.nodes):
        def arg(a):
            if isinstance(a, str):
                iv = box[a]
                return IA(iv.lo, iv.hi), None, None
            return V[a], G[a], H[a]

        if node.op == "var":
            v, g, h = arg(node.args[0])
        elif node.op == "const":
            v = IA.point(node.value) if node.exact else widen_inexact(node.value)
            g = h = None
        elif node.op in ("add", "sub"):
            (a, ga, ha), (b, gb, hb) = arg(node.args[0]), arg(node.args[1])
            if node.op == "add":
                v, g, h = a + b, _addz(ga, gb), _addz(ha, hb)
            else:
                v = a - b
                g = _addz(ga, None if gb is None else -gb)
                h = _addz(ha, None if hb is None else -hb)
        elif node.op in ("mul", "div"):
            (a, ga, ha), (b, gb, hb) = arg(node.args[0]), arg(node.args[1])
            if node.op == "div":
                r = 1.0 / b
                gr = None if gb is None else gb * -(r.sqr())
                hr = None
                if gb is not None:
                    hr = _outer(gb, gb) * ((r.sqr() * r) * 2.0)
                if hb is not None:
                    hr = _addz(hr, hb * -(r.sqr()))
                b, gb, hb = r, gr, hr
            v = a * b
            g = _addz(_scale(ga, b), _scale(gb, a))
            h = _addz(_scale(ha, b), _scale(hb, a))
            if ga is not None and gb is not None:
                h = _addz(h, _outer(ga, gb) + _outer(gb, ga))
        elif node.op == "neg":
            a, ga, ha = arg(node.args[0])
            v = -a
            g = None if ga is None else -ga
            h = None if ha is None else -ha
        else:
            a, ga, ha = arg(node.args[0])
            v = a.apply(node.op)
            d1, d2 = _unary_derivs(node.op, a, v)
            g = _scale(ga, d1)
            h = _scale(ha, d1)
            if ga is not None:
                h = _addz(h, _outer(ga, ga) * d2)
        # perturbation of this node: y = w (1 + e) + d
        e, d = errs[k]
        if e > 0 or d > 0:
            one_e = IA.point(1.0) + IA(-e, e) if e > 0 else None
            w = v
            if one_e is not None:
                v = w * one_e
                g = _scale(g, one_e)
                h = _scale(h, one_e)
            if d > 0:
                v = v + IA(-d, d)
            unit = np.zeros(m)
            if e > 0:
                ue = unit.copy()
                ue[pos[(k, "e")]] = 1.0
                ge = IA(ue, ue) * w
                if g is not None:
                    cross = _outer(g, IA(ue, ue))
                    h = _addz(h, cross + _outer(IA(ue, ue), g))
                g = _addz(g, ge)
            if d > 0:
                ud = unit.copy()
                ud[pos[(k, "d")]] = 1.0
                g = _addz(g, IA(ud, ud))
        V.append(v)
        G.append(g)
        H.append(h)
    return V, H, radius


def _remainder_from(h: IA | None, radius: np.ndarray) -> float:
    if h is None or radius.size == 0:
        return 0.0
    if np.any(h.invalid):
        raise DomainError("second derivatives are unbounded under the perturbation")
    mag = h.mag()
    total = Fraction(0)
    nz = np.nonzero(mag)
    for i, j in zip(*nz):
        total += Fraction(float(mag[i, j])) * Fraction(float(radius[i])) * Fraction(float(radius[j]))
    return _round_up(total / 2)


def _site_errors(seq: CallSequence, assignment: Mapping[int | str, Any]) -> dict[int, tuple[float, float]]:
    out = {}
    for key, val in assignment.items():
        out[seq.site_index(key)] = _eps_delta(val)
    missing = [seq.label(s) for s in seq.sites if s not in out]
    if missing:
        raise KeyError(f"assignment misses sites {missing}")
    return out


def lagrange_remainder(seq: CallSequence, inputs: Sequence[InputSpec],
                       assignment: Mapping[int | str, Any],
                       cfg: OptimizerConfig | None = None, root: int | None = None) -> float:
    """Bound on all second- and higher-order error terms of node ``root``.

    ``0.5 * sum_ij sup|d2 x / du_i du_j| * r_i * r_j`` where ``u`` ranges over
    every eps/delta (tunable sites from ``assignment``, fixed operators from
    their base errors) and the sup is an interval enclosure over the input
    box and the whole perturbation box.
    """
    errs = _node_errors(seq, _site_errors(seq, assignment))
    if not any(e or d for e, d in errs):
        return 0.0
    _, H, radius = _hessians(seq, inputs, errs)
    root = seq.result if root is None else root
    return _remainder_from(H[root], radius)


# ---------------------------------------------------------------------------
# verification


def unrestricted_side(value: float, upper: bool) -> bool:
    """Whether a domain endpoint stands for 'no restriction' on that side."""
    return value >= 1.79e308 if upper else value <= -1.79e308


def slack(arg_range: Interval, domain_lo: float, domain_hi: float) -> float:
    """``min(a1 - d1, d2 - a2)`` over the restricted sides (inf if none)."""
    s = math.inf
    if not unrestricted_side(domain_lo, upper=False):
        s = min(s, arg_range.lo - domain_lo)
    if not unrestricted_side(domain_hi, upper=True):
        s = min(s, domain_hi - arg_range.hi)
    return s


def joint_linear_bound(seq: CallSequence, inputs: Sequence[InputSpec], errs,
                       cfg: OptimizerConfig | None = None, root: int | None = None) -> float:
    """Max over the box of the summed absolute first-order error terms."""
    root = seq.result if root is None else root
    largest = max((max(e, d) for e, d in errs[:root + 1]), default=0.0)
    if largest == 0:
        return 0.0
    # scale by a power of two so the optimizer's absolute tolerance is meaningful
    s = 2.0 ** math.floor(math.log2(largest))
    terms = sym.ZERO
    for k in range(root + 1):
        e, d = errs[k]
        if not (e or d):
            continue
        v, a = differentiate(seq, k, root)
        if a is sym.ZERO:
            continue
        if e:
            terms = sym.add(terms, sym.mul(sym.const(e / s), sym.absolute(sym.mul(v, a))))
        if d:
            terms = sym.add(terms, sym.mul(sym.const(d / s), sym.absolute(a)))
    if terms is sym.ZERO:
        return 0.0
    return _round_up(Fraction(maximize(terms, make_box(inputs), cfg).upper) * Fraction(s))


@dataclass(frozen=True)
class Verification:
    bound: float
    linear: float
    remainder: float
    valid: bool
    reasons: tuple[str, ...] = ()


def verify_configuration(seq: CallSequence, inputs: Sequence[InputSpec],
                         config: Mapping[int | str, Any],
                         cfg: OptimizerConfig | None = None,
                         scale: float = 1.0) -> Verification:
    """Sound error bound and range verdict for a concrete configuration.

    The bound jointly maximizes the summed first-order terms (capturing
    correlations the per-site model drops) and adds the Lagrange remainder.
    For each implementation with a restricted domain the argument's true
    range, widened by the argument's own verified error, must lie strictly
    inside the domain.  ``scale`` divides the bound (relative error).
    """
    site_errs = _site_errors(seq, config)
    errs = _node_errors(seq, site_errs)
    box = make_box(inputs)
    try:
        _, H, radius = _hessians(seq, inputs, errs)
        rem = _remainder_from(H[seq.result], radius)
    except DomainError as exc:
        return Verification(math.inf, math.inf, math.inf, False, (str(exc),))
    lin = joint_linear_bound(seq, inputs, errs, cfg)
    bound = _round_up(Fraction(lin) + Fraction(rem))
    if scale != 1.0:
        bound = _round_up(Fraction(bound) / Fraction(scale))
    reasons = []
    for key, spec in config.items():
        site = seq.site_index(key)
        lo = getattr(spec, "domain_lo", -math.inf)
        hi = getattr(spec, "domain_hi", math.inf)
        if unrestricted_side(lo, False) and unrestricted_side(hi, True):
            continue
        arg = seq.nodes[site].args[0]
        arg_range = range_of(seq.arg_expr(arg), box, cfg)
        if isinstance(arg, str):
            err = 0.0
        else:
            try:
                err = _round_up(Fraction(joint_linear_bound(seq, inputs, errs, cfg, root=arg))
                                + Fraction(_remainder_from(H[arg], radius)))
            except DomainError as exc:
                reasons.append(f"{seq.label(site)}: {exc}")
                continue
        s = slack(arg_range, lo, hi)
        if not err < s:
            name = getattr(spec, "id", "implementation")
            reasons.append(f"{seq.label(site)}: argument range {arg_range.lo:.6g}..{arg_range.hi:.6g} "
                           f"with error {err:.3g} leaves domain [{lo:.6g}, {hi:.6g}] of {name}")
    return Verification(bound, lin, rem, not reasons, tuple(reasons))
