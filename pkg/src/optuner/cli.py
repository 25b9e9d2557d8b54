"""Command-line interface.

    optuner tune povprog.fpcore --points 32 -o report.json
    optuner emit report.json --point 3 -o kernel.c
    optuner catalog list --function exp
    optuner model logexp.fpcore

Exit codes: 0 success, 1 tuning infeasible, 2 usage or parse error,
3 optimizer budget exhausted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .catalog import (Catalog, benchmark_costs, builtin_catalog, dumps, load_catalog,
                      measure_accuracy, validate)
from .emit import emit_c
from .errors import (BudgetExhausted, CatalogError, DomainError, InfeasibleError, NotFoundError,
                     ParseError)
from .error_model import build_error_model
from .expr import linearize, parse_expression
from .optimize import DEFAULT_CONFIG, OptimizerConfig
from .tuner import load_report, tune

EXIT_OK, EXIT_INFEASIBLE, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3


def _catalog(arg: str | None) -> Catalog:
    source = arg or os.environ.get("OPTUNER_CATALOG") or "builtin"
    if source == "builtin":
        return builtin_catalog()
    return load_catalog(source)


def _cfg(args) -> OptimizerConfig:
    return OptimizerConfig(
        rel_tol=args.tolerance or DEFAULT_CONFIG.rel_tol,
        max_subdivisions=args.budget or DEFAULT_CONFIG.max_subdivisions,
    )


def _box(items):
    box = {}
    for item in items or []:
        name, _, rng = item.partition("=")
        try:
            lo, hi = (float(v) for v in rng.split(","))
        except ValueError:
            raise ParseError(f"--box expects name=lo,hi, got {item!r}") from None
        box[name] = (lo, hi)
    return box


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_tune(args) -> int:
    text = Path(args.input).read_text()
    report = tune(text, _catalog(args.catalog), points=args.points, max_error=args.max_error,
                  relative=args.rel_error, threads=args.threads, box=_box(args.box),
                  cfg=_cfg(args))
    if args.format == "csv":
        if args.output not in (None, "-"):
            _write(args.output, report.to_json())
            _write(str(Path(args.output).with_suffix(".csv")), report.to_csv())
        else:
            _write(None, report.to_csv())
    else:
        _write(args.output, report.to_json())
    for c in report.rejected:
        if c.status == "range-invalid":
            print(f"rejected point {c.id}: {'; '.join(c.reasons)}", file=sys.stderr)
    if report.truncated:
        print(f"note: stopped after {args.points} solver points", file=sys.stderr)
    if not report.points:
        print("no configuration meets the requested error bound", file=sys.stderr)
        return EXIT_INFEASIBLE
    if report.model.loose:
        print("optimizer budget exhausted; coefficients are sound but loose", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


def cmd_emit(args) -> int:
    data = load_report(Path(args.report).read_text())
    matches = [p for p in data["points"] if p["id"] == args.point]
    if not matches:
        ids = ", ".join(str(p["id"]) for p in data["points"])
        raise NotFoundError(f"no point {args.point} in report (have {ids})")
    expr, inputs = parse_expression(data["expression"])
    seq = linearize(expr, [i.name for i in inputs])
    catalog = _catalog(args.catalog)
    selection = {}
    for site, ident in matches[0]["selection"].items():
        fn = seq.nodes[seq.site_index(site)].op
        selection[site] = catalog.lookup(fn, ident)
    _write(args.output, emit_c(seq, selection, args.name))
    return EXIT_OK


def cmd_catalog(args) -> int:
    catalog = _catalog(args.catalog)
    if args.action == "list":
        rows = [s for s in catalog
                if (args.function is None or s.function == args.function)
                and (args.all or s.precision == "double")]
        print(f"{'function':8} {'id':14} {'domain':>30} {'eps':>10} {'delta':>10} {'cost':>7}  provenance")
        for s in rows:
            dom = f"[{s.domain_lo:.3g}, {s.domain_hi:.3g}]"
            print(f"{s.function:8} {s.id:14} {dom:>30} {s.eps:10.3g} {s.delta:10.3g} {s.cost:7.2f}  "
                  f"{s.provenance}{' *' if s.evaluable else ''}")
        return EXIT_OK
    if args.action == "validate":
        issues = validate(catalog, samples=args.samples)
        for s in catalog:
            if s.evaluable is None:
                continue
            bad = [i for i in issues if i.startswith(s.name + ":")]
            print(f"{s.name:24} {'FAIL' if bad else 'ok'}")
        for i in issues:
            print(i, file=sys.stderr)
        return EXIT_INFEASIBLE if issues else EXIT_OK
    if args.action == "measure":
        timed = benchmark_costs(catalog)
        _write(args.output, dumps(timed))
        return EXIT_OK
    if args.action == "accuracy":
        for s in catalog:
            if s.evaluable is None or (args.function and s.function != args.function):
                continue
            lo, hi = max(s.domain_lo, -1e3), min(s.domain_hi, 1e3)
            m = measure_accuracy(s.evaluable, (lo, hi), args.samples)
            print(f"{s.name:24} eps~{m.eps:.3g} delta~{m.delta:.3g} "
                  f"(declared {s.eps:.3g}, {s.delta:.3g})")
        return EXIT_OK
    raise AssertionError(args.action)


def cmd_model(args) -> int:
    expr, inputs = parse_expression(Path(args.input).read_text())
    seq = linearize(expr, [i.name for i in inputs])
    model = build_error_model(seq, inputs, _cfg(args), relative=args.rel_error, threads=args.threads)
    out = {
        "sites": [{"site": l, "node": k, "function": seq.nodes[k].op, "A": a, "B": b}
                  for k, l, a, b in zip(model.sites, model.labels, model.A, model.B)],
        "constant": model.constant,
        "kind": model.kind,
    }
    print(seq.describe())
    print(json.dumps(out, indent=2))
    return EXIT_BUDGET if model.loose else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="optuner", description="Per-call-site math library tuning.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--catalog", help="catalog file or 'builtin' (default: $OPTUNER_CATALOG or builtin)")
        sp.add_argument("--tolerance", type=float, help="relative tolerance of the global optimizer")
        sp.add_argument("--budget", type=int, help="subdivision budget per maximization")
        sp.add_argument("--threads", type=int, default=None)
        sp.add_argument("--rel-error", action="store_true", help="bound relative instead of absolute error")

    t = sub.add_parser("tune", help="compute a verified speed/accuracy curve")
    t.add_argument("input")
    common(t)
    t.add_argument("--points", type=int, default=64)
    t.add_argument("--max-error", type=float)
    t.add_argument("--format", choices=("json", "csv"), default="json")
    t.add_argument("--box", action="append", metavar="VAR=LO,HI", help="override an input range")
    t.add_argument("-o", "--output")
    t.set_defaults(func=cmd_tune)

    e = sub.add_parser("emit", help="write C source for one point of a report")
    e.add_argument("report")
    e.add_argument("--point", type=int, required=True)
    e.add_argument("--catalog")
    e.add_argument("--name", default="optuner_kernel")
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_emit)

    c = sub.add_parser("catalog", help="inspect, validate or re-time a catalog")
    c.add_argument("action", choices=("list", "validate", "measure", "accuracy"))
    c.add_argument("--catalog")
    c.add_argument("--function")
    c.add_argument("--all", action="store_true", help="include single-precision rows")
    c.add_argument("--samples", type=int, default=2000)
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_catalog)

    m = sub.add_parser("model", help="print the linear error model")
    m.add_argument("input")
    common(m)
    m.set_defaults(func=cmd_model)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, CatalogError, NotFoundError, OSError, ValueError) as exc:
        print(f"optuner: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InfeasibleError, DomainError) as exc:
        print(f"optuner: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except BudgetExhausted as exc:
        print(f"optuner: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
