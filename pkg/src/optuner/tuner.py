"""End-to-end tuning: model, constrain, solve, verify, filter.

    >>> report = tune(open("povprog.fpcore").read())
    >>> for p in report.points:
    ...     print(p.cost, p.verified_error, p.selection)
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

from .catalog import Catalog, ImplSpec, builtin_catalog
from .error_model import (ErrorModel, _round_up, build_error_model, slack, unrestricted_side,
                          verify_configuration)
from .errors import DomainError, InfeasibleError
from .expr import CallSequence, Expr, InputSpec, linearize, parse_expression, to_fpcore
from .ilp import Candidate, Conditional, SelectionProblem, iter_pareto
from .optimize import DEFAULT_CONFIG, Interval, OptimizerConfig, make_box, range_of

DEFAULT_POINTS = 64


@dataclass(frozen=True)
class RangeConstraint:
    """Validity requirement of a restricted-domain candidate at one site."""

    site: int
    candidate: int
    arg_node: int | None
    arg_range: Interval
    domain: tuple[float, float]
    slack: Fraction
    A: Mapping[int, float]
    B: Mapping[int, float]
    constant: float = 0.0

    @property
    def effective_slack(self) -> Fraction:
        """Slack left for tunable-site error: minus fixed-op error and one ulp."""
        s = self.slack - Fraction(self.constant)
        return s - Fraction(math.ulp(float(self.slack))) if s > 0 else s


@dataclass
class Configuration:
    id: int
    selection: dict[str, ImplSpec]
    model_error: float
    verified_error: float
    cost: float
    status: str = "valid"
    reasons: tuple[str, ...] = ()
    remainder: float = 0.0

    def names(self) -> dict[str, str]:
        return {site: spec.id for site, spec in self.selection.items()}


@dataclass
class Problem:
    """A selection problem together with the data needed to interpret it."""

    problem: SelectionProblem
    seq: CallSequence
    inputs: list[InputSpec]
    model: ErrorModel
    candidates: list[list[ImplSpec]]
    constraints: list[RangeConstraint]
    dropped: list[tuple[str, str, str]] = field(default_factory=list)


@dataclass
class TuningReport:
    expression: str
    digest: str
    box: dict[str, tuple[float, float]]
    model: ErrorModel
    points: list[Configuration]
    rejected: list[Configuration]
    seq: CallSequence
    inputs: list[InputSpec]
    truncated: bool = False
    tolerance: float = DEFAULT_CONFIG.rel_tol
    dropped: list[tuple[str, str, str]] = field(default_factory=list)

    def point(self, pid: int) -> Configuration:
        for p in self.points + self.rejected:
            if p.id == pid:
                return p
        raise KeyError(f"no point with id {pid}")

    def to_dict(self) -> dict:
        coeffs = []
        for k, label, a, b in zip(self.model.sites, self.model.labels, self.model.A, self.model.B):
            coeffs.append({"site": label, "function": self.seq.nodes[k].op, "A": a, "B": b})
        return {
            "expression": self.expression,
            "box": {v: [lo, hi] for v, (lo, hi) in self.box.items()},
            "model": {"coefficients": coeffs, "constant": self.model.constant},
            "points": [{
                "id": p.id,
                "selection": p.names(),
                "model_error": p.model_error,
                "verified_error": p.verified_error,
                "cost": p.cost,
                "status": p.status,
            } for p in self.points],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "cost", "verified_error", "model_error"])
        for p in self.points:
            w.writerow([p.id, repr(p.cost), repr(p.verified_error), repr(p.model_error)])
        return buf.getvalue()


def program_text(expr: Expr, inputs: Sequence[InputSpec], name: str | None = None) -> str:
    """A complete FPCore program for ``expr`` over the given input box."""
    args = " ".join(i.name for i in inputs)
    pre = " ".join(f"(<= {i.lo!r} {i.name} {i.hi!r})" for i in inputs)
    if len(inputs) > 1:
        pre = f"(and {pre})"
    head = f"(FPCore ({args})"
    if name:
        head += f" :name {json.dumps(name)}"
    if inputs:
        head += f" :pre {pre}"
    return f"{head} {to_fpcore(expr)})"


# ---------------------------------------------------------------------------


def _arg_ranges(seq, inputs, cfg):
    box = make_box(inputs)
    out = {}
    for s in seq.sites:
        arg = seq.nodes[s].args[0]
        if arg not in out:
            out[arg] = range_of(seq.arg_expr(arg), box, cfg)
    return out


def build_problem(seq: CallSequence, inputs: Sequence[InputSpec], catalog: Catalog | None = None,
                  cfg: OptimizerConfig | None = None, model: ErrorModel | None = None,
                  threads: int | None = None, relative: bool = False) -> Problem:
    """Selection problem with one candidate list per tunable site.

    Restricted-domain candidates whose argument range leaves no slack are
    dropped; the others carry a conditional row bounding the argument's
    accumulated error by the slack.
    """
    catalog = catalog if catalog is not None else builtin_catalog()
    model = model or build_error_model(seq, inputs, cfg, relative=relative, threads=threads)
    ranges = _arg_ranges(seq, inputs, cfg)
    candidates: list[list[ImplSpec]] = []
    cand_rows: list[tuple[Candidate, ...]] = []
    constraints: list[RangeConstraint] = []
    dropped = []
    for i, s in enumerate(seq.sites):
        fn = seq.nodes[s].op
        label = seq.label(s)
        arg = seq.nodes[s].args[0]
        r = ranges[arg]
        if not (math.isfinite(r.lo) and math.isfinite(r.hi)):
            raise DomainError(f"argument range of {label} is unbounded: {r}")
        kept = []
        for spec in catalog.for_function(fn):
            if unrestricted_side(spec.domain_lo, False) and unrestricted_side(spec.domain_hi, True):
                kept.append((spec, None))
                continue
            sides = []
            if not unrestricted_side(spec.domain_lo, False):
                sides.append(Fraction(r.lo) - Fraction(spec.domain_lo))
            if not unrestricted_side(spec.domain_hi, True):
                sides.append(Fraction(spec.domain_hi) - Fraction(r.hi))
            S = min(sides)
            if isinstance(arg, str):
                rc = RangeConstraint(i, -1, None, r, (spec.domain_lo, spec.domain_hi), S, {}, {})
            else:
                row = model.rows[arg]
                rc = RangeConstraint(i, -1, arg, r, (spec.domain_lo, spec.domain_hi), S,
                                     row.A, row.B, row.constant)
            if rc.effective_slack <= 0:
                dropped.append((label, spec.id, f"slack {float(S):.4g} leaves no room"))
                continue
            kept.append((spec, rc))
        if not kept:
            raise InfeasibleError(f"no implementation of {fn} is valid for site {label} "
                                  f"(argument range {r.lo:.6g}..{r.hi:.6g})")
        specs = []
        for j, (spec, rc) in enumerate(kept):
            specs.append(spec)
            if rc is not None:
                constraints.append(RangeConstraint(i, j, rc.arg_node, rc.arg_range, rc.domain,
                                                   rc.slack, rc.A, rc.B, rc.constant))
        candidates.append(specs)
        cand_rows.append(tuple(Candidate(sp.id, sp.eps, sp.delta, sp.cost) for sp in specs))
    pos = {s: i for i, s in enumerate(seq.sites)}
    conditionals = []
    for rc in constraints:
        A = [Fraction(0)] * len(seq.sites)
        B = [Fraction(0)] * len(seq.sites)
        for k, v in rc.A.items():
            A[pos[k]] = Fraction(v)
        for k, v in rc.B.items():
            B[pos[k]] = Fraction(v)
        conditionals.append(Conditional(rc.site, rc.candidate, tuple(A), tuple(B), rc.effective_slack))
    problem = SelectionProblem(tuple(seq.labels), tuple(cand_rows), model.A, model.B,
                               Fraction(model.constant), tuple(conditionals))
    return Problem(problem, seq, list(inputs), model, candidates, constraints, dropped)


def pareto_filter(points: Iterable) -> list:
    """Sort by cost and keep points whose verified error beats every cheaper one."""
    ordered = sorted(points, key=lambda p: (p.cost, p.verified_error))
    out = []
    best = math.inf
    for p in ordered:
        if p.verified_error < best:
            out.append(p)
            best = p.verified_error
    return out


def _parse_source(source, box_override):
    if isinstance(source, str):
        expr, inputs = parse_expression(source)
    else:
        expr, inputs = source
    inputs = list(inputs)
    if box_override:
        unknown = set(box_override) - {i.name for i in inputs}
        if unknown:
            raise KeyError(f"box override names unknown variables {sorted(unknown)}")
        inputs = [InputSpec(i.name, *box_override[i.name]) if i.name in box_override else i
                  for i in inputs]
    return expr, inputs


def tune(source: str | tuple[Expr, Sequence[InputSpec]], catalog: Catalog | None = None,
         points: int = DEFAULT_POINTS, max_error: float | None = None, relative: bool = False,
         threads: int | None = None, tolerance: float | None = None,
         box: Mapping[str, tuple[float, float]] | None = None,
         cfg: OptimizerConfig | None = None) -> TuningReport:
    """Tune an FPCore program (text, or a parsed ``(expr, inputs)`` pair).

    ``box`` overrides declared input ranges.  ``max_error`` keeps only final
    points whose verified error is at most that value.  ``tolerance`` is the
    optimizer's relative tolerance.
    """
    expr, inputs = _parse_source(source, box)
    if cfg is None:
        cfg = OptimizerConfig(rel_tol=tolerance) if tolerance else DEFAULT_CONFIG
    seq = linearize(expr, [i.name for i in inputs])
    prob = build_problem(seq, inputs, catalog, cfg, threads=threads, relative=relative)
    model = prob.model

    solved = list(iter_pareto(prob.problem, points + 1))
    truncated = len(solved) > points
    solved = solved[:points]

    def verify(pt):
        selection = {seq.labels[i]: prob.candidates[i][j] for i, j in enumerate(pt.choice)}
        v = verify_configuration(seq, inputs, selection, cfg, scale=model.scale)
        status = "valid" if v.valid else "range-invalid"
        return Configuration(pt.rank, selection, _round_up(pt.error), v.bound,
                             float(pt.cost), status, v.reasons, v.remainder)

    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            configs = list(ex.map(verify, solved))
    else:
        configs = [verify(p) for p in solved]
    valid = [c for c in configs if c.status == "valid"]
    rejected = [c for c in configs if c.status != "valid"]
    final = pareto_filter(valid)
    kept = {c.id for c in final}
    for c in valid:
        if c.id not in kept:
            c.status = "dominated"
            rejected.append(c)
    if max_error is not None:
        final = [c for c in final if c.verified_error <= max_error]
    text = program_text(expr, inputs)
    return TuningReport(
        expression=text,
        digest=hashlib.sha256(text.encode()).hexdigest(),
        box={i.name: (i.lo, i.hi) for i in inputs},
        model=model,
        points=final,
        rejected=sorted(rejected, key=lambda c: c.id),
        seq=seq,
        inputs=inputs,
        truncated=truncated,
        tolerance=cfg.rel_tol,
        dropped=prob.dropped,
    )


def load_report(text: str) -> dict:
    """Parse a JSON report written by :meth:`TuningReport.to_json`."""
    data = json.loads(text)
    missing = {"expression", "box", "model", "points"} - set(data)
    if missing:
        raise ValueError(f"report lacks {sorted(missing)}")
    return data
