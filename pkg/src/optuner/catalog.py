"""Implementation specifications: accuracy, valid domain and cost.

An :class:`ImplSpec` promises ``|f~(x) - f(x)| <= eps |f(x)| + delta`` for
every ``x`` in ``[domain_lo, domain_hi]``.  The built-in catalog holds the
published accuracy/cost figures of several math libraries plus a few
locally evaluable approximations whose bounds were measured.
"""

from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import CatalogError, DomainError, NotFoundError
from .expr import TUNABLE, parse_number
from .implementations import EVALUABLES, evaluable_function, get_evaluable, reference

DBL_MAX = sys.float_info.max
ULP = 2.0**-52
DENORMAL_UNIT = 2.0**-1022
FORMAT_HEADER = "optuner-catalog v1"
PROVENANCES = ("paper-table", "measured", "user")
PRECISIONS = ("double", "single")
FIELDS = ("function", "id", "domain_lo", "domain_hi", "eps", "delta", "cost",
          "provenance", "evaluable", "precision")


def normalize_id(name: str) -> str:
    return name.strip().lower().replace("-", "_").replace(" ", "_")


@dataclass(frozen=True)
class ImplSpec:
    function: str
    id: str
    domain_lo: float
    domain_hi: float
    eps: float
    delta: float
    cost: float
    provenance: str = "user"
    evaluable: str | None = None
    precision: str = "double"

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise CatalogError(f"{self.function}/{self.id}: " + "; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if self.function not in TUNABLE:
            out.append(f"unsupported function {self.function!r}")
        if not self.id or any(c.isspace() for c in self.id):
            out.append(f"bad id {self.id!r}")
        if not (self.eps >= 0 and math.isfinite(self.eps)):
            out.append(f"eps must be finite and >= 0, got {self.eps!r}")
        if not (self.delta >= 0 and math.isfinite(self.delta)):
            out.append(f"delta must be finite and >= 0, got {self.delta!r}")
        if not (self.cost > 0 and math.isfinite(self.cost)):
            out.append(f"cost must be positive, got {self.cost!r}")
        if not self.domain_lo < self.domain_hi:
            out.append(f"empty domain [{self.domain_lo!r}, {self.domain_hi!r}]")
        if self.provenance not in PROVENANCES:
            out.append(f"unknown provenance {self.provenance!r}")
        if self.precision not in PRECISIONS:
            out.append(f"unknown precision {self.precision!r}")
        if self.evaluable is not None:
            if self.evaluable not in EVALUABLES:
                out.append(f"unknown evaluable {self.evaluable!r}")
            elif evaluable_function(self.evaluable) != self.function:
                out.append(f"evaluable {self.evaluable!r} computes a different function")
        return out

    @property
    def name(self) -> str:
        return f"{self.id}:{self.function}"

    @property
    def unrestricted(self) -> bool:
        return self.domain_lo <= -DBL_MAX and self.domain_hi >= DBL_MAX

    def covers(self, lo: float, hi: float) -> bool:
        return self.domain_lo <= lo and hi <= self.domain_hi

    def __call__(self, x: float) -> float:
        if self.evaluable is None:
            raise NotFoundError(f"{self.name} is not evaluable here")
        if not self.domain_lo <= x <= self.domain_hi:
            raise DomainError(f"{x!r} outside the domain of {self.name}")
        return get_evaluable(self.evaluable)(x)


class Catalog:
    """An immutable collection of :class:`ImplSpec` keyed by (function, id)."""

    version = 1

    def __init__(self, specs: Iterable[ImplSpec] = ()):
        self._specs: tuple[ImplSpec, ...] = tuple(specs)
        self._index: dict[tuple[str, str], ImplSpec] = {}
        for s in self._specs:
            key = (s.function, s.id)
            if key in self._index:
                raise CatalogError(f"duplicate implementation {s.id!r} for {s.function}")
            self._index[key] = s

    def __iter__(self) -> Iterator[ImplSpec]:
        return iter(self._specs)

    def __len__(self):
        return len(self._specs)

    def __eq__(self, other):
        return isinstance(other, Catalog) and self._specs == other._specs

    def __repr__(self):
        return f"Catalog({len(self)} implementations)"

    def lookup(self, function: str, name: str) -> ImplSpec:
        key = (function, normalize_id(name))
        if key not in self._index:
            raise NotFoundError(f"no implementation {name!r} of {function}")
        return self._index[key]

    def for_function(self, function: str, precision: str = "double") -> list[ImplSpec]:
        return [s for s in self._specs if s.function == function and s.precision == precision]

    def get(self, name: str) -> ImplSpec:
        """Look up by full name ``id:function``."""
        ident, _, function = name.rpartition(":")
        return self.lookup(function, ident)

    def replace(self, spec: ImplSpec) -> Catalog:
        return Catalog(spec if (s.function, s.id) == (spec.function, spec.id) else s
                       for s in self._specs)

    def merged(self, other: Catalog) -> Catalog:
        """Entries of ``other`` override same-keyed entries of ``self``."""
        theirs = {(s.function, s.id): s for s in other}
        out = [theirs.pop((s.function, s.id), s) for s in self._specs]
        return Catalog(out + list(theirs.values()))


# ---------------------------------------------------------------------------
# the built-in dataset

_DOUBLE_DOMAINS = {
    "exp": (-DBL_MAX, 709.78),
    "log": (5e-324, 1.79e30),
    "sin": (-DBL_MAX, DBL_MAX),
    "cos": (-DBL_MAX, DBL_MAX),
    "tan": (-DBL_MAX, DBL_MAX),
}

# function -> [(id, ulps, cost, domain or None)]
_DOUBLE_ROWS = {
    "exp": [("crlibm", 0.5, 54.02), ("glibc", 1.0, 10.71), ("openlibm", 1.0, 10.70),
            ("amd_libm", 1.0, 10.78), ("vdt", 5.0, 5.32)],
    "log": [("crlibm", 0.5, 32.93), ("glibc", 1.0, 8.53), ("openlibm", 1.0, 8.53),
            ("amd_libm", 1.0, 8.36), ("vdt", 5.0, 5.99)],
    "sin": [("crlibm", 0.5, 35.27), ("glibc", 1.0, 8.76), ("openlibm", 1.0, 8.76),
            ("amd_libm", 1.0, 7.56), ("vdt", 5.0, 4.42), ("vdt_reduced", 5.0, 1.82, (-0.78, 0.78))],
    "cos": [("crlibm", 0.5, 34.35), ("glibc", 1.0, 8.84), ("openlibm", 1.0, 8.82),
            ("amd_libm", 1.0, 7.19), ("vdt", 5.0, 4.20), ("vdt_reduced", 5.0, 2.04, (-0.78, 0.78))],
    "tan": [("crlibm", 0.5, 80.20), ("glibc", 1.0, 15.81), ("openlibm", 1.0, 16.00),
            ("amd_libm", 1.0, 28.66), ("vdt", 5.0, 8.90)],
}

_FLT_MAX = 3.40e38
_SINGLE_DOMAINS = {
    "exp": (-_FLT_MAX, 88.72),
    "log": (1.40e-45, _FLT_MAX),
    "sin": (-_FLT_MAX, _FLT_MAX),
    "cos": (-_FLT_MAX, _FLT_MAX),
    "tan": (-_FLT_MAX, _FLT_MAX),
}
_SINGLE_ROWS = {
    "exp": [("rlibm", 2.68e8, 5.06), ("glibc", 4.03e8, 8.46), ("openlibm", 4.03e8, 4.86),
            ("amd_libm", 4.03e8, 4.68), ("vdt", 1.76e10, 5.20)],
    "log": [("rlibm", 2.68e8, 6.26), ("glibc", 2.76e8, 7.15), ("openlibm", 2.76e8, 7.13),
            ("amd_libm", 2.76e8, 5.88), ("vdt", 5.45e8, 5.80)],
    "sin": [("glibc", 2.16e9, 7.13), ("openlibm", 2.16e9, 7.10), ("amd_libm", 2.16e9, 7.64),
            ("vdt", 1.74e10, 4.69), ("vdt_reduced", 1.74e10, 1.60, (-0.785, 0.785))],
    "cos": [("glibc", 2.16e9, 7.13), ("openlibm", 2.16e9, 7.10), ("amd_libm", 2.16e9, 6.76),
            ("vdt", 1.74e10, 4.47), ("vdt_reduced", 1.74e10, 1.93, (-0.785, 0.785))],
    "tan": [("glibc", 5.37e8, 8.50), ("openlibm", 5.37e8, 8.49), ("amd_libm", 5.37e8, 7.03),
            ("vdt", 1.77e10, 8.32)],
}

# locally evaluable approximations; bounds are sampled maxima inflated by 10%
_EVALUABLE_ROWS = [
    ImplSpec("sin", "identity", -3.145, 3.145, 0.0, 3.15, 0.3, "measured", "identity:sin"),
    ImplSpec("cos", "negidentity", -3.145, 3.145, 0.0, 4.15, 0.3, "measured", "negidentity:cos"),
    ImplSpec("sin", "table255", -3.16, 3.16, 0.0, 0.0272, 1.2, "measured", "table255:sin"),
    ImplSpec("cos", "table255", -3.16, 3.16, 0.0, 0.0272, 1.2, "measured", "table255:cos"),
    ImplSpec("sin", "poly13", -1.5708, 1.5708, 0.0, 7.0e-14, 2.9, "measured", "poly13:sin"),
    ImplSpec("sin", "poly13_wide", -3.1416, 3.1416, 0.0, 8.4e-6, 2.9, "measured", "poly13:sin"),
]


def _table_specs(rows, domains, precision, suffix):
    out = []
    for fn, entries in rows.items():
        for row in entries:
            ident, ulps, cost = row[:3]
            lo, hi = row[3] if len(row) > 3 else domains[fn]
            evaluable = f"libm:{fn}" if ident == "glibc" and precision == "double" else None
            out.append(ImplSpec(fn, ident + suffix, lo, hi, ulps * ULP, ulps * DENORMAL_UNIT,
                                cost, "paper-table", evaluable, precision))
    return out


def builtin_catalog() -> Catalog:
    specs = _table_specs(_DOUBLE_ROWS, _DOUBLE_DOMAINS, "double", "")
    specs += _EVALUABLE_ROWS
    specs += _table_specs(_SINGLE_ROWS, _SINGLE_DOMAINS, "single", "_f32")
    return Catalog(specs)


# ---------------------------------------------------------------------------
# text format


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dumps(catalog: Catalog) -> str:
    lines = [FORMAT_HEADER]
    for s in catalog:
        lines.append(" ".join(f"{k}={_fmt(getattr(s, k))}" for k in FIELDS))
    return "\n".join(lines) + "\n"


def save_catalog(catalog: Catalog, path) -> None:
    Path(path).write_text(dumps(catalog))


def _float_field(key, text, line):
    if text in ("inf", "+inf"):
        return DBL_MAX
    if text == "-inf":
        return -DBL_MAX
    parsed = parse_number(text)
    if parsed is None:
        raise CatalogError(f"{key}: not a number: {text!r}", line)
    return parsed[0]


def loads(text: str) -> Catalog:
    """Parse the catalog text format.

    The first non-blank line must be the version header.  Each further
    non-comment line is one record of whitespace-separated ``key=value``
    pairs.  Two records sharing an id for the same function but covering
    different domains become ``id@lo..hi`` entries.
    """
    raw: list[tuple[int, dict]] = []
    header_seen = False
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if not header_seen:
            if body != FORMAT_HEADER:
                raise CatalogError(f"expected header {FORMAT_HEADER!r}, got {body!r}", lineno)
            header_seen = True
            continue
        rec = {}
        for tok in body.split():
            key, eq, val = tok.partition("=")
            if not eq:
                raise CatalogError(f"expected key=value, got {tok!r}", lineno)
            if key not in FIELDS:
                raise CatalogError(f"unknown key {key!r}", lineno)
            if key in rec:
                raise CatalogError(f"repeated key {key!r}", lineno)
            rec[key] = val
        missing = [k for k in FIELDS[:7] if k not in rec]
        if missing:
            raise CatalogError(f"missing keys {', '.join(missing)}", lineno)
        try:
            values = dict(
                function=rec["function"],
                id=normalize_id(rec["id"]),
                domain_lo=_float_field("domain_lo", rec["domain_lo"], lineno),
                domain_hi=_float_field("domain_hi", rec["domain_hi"], lineno),
                eps=_float_field("eps", rec["eps"], lineno),
                delta=_float_field("delta", rec["delta"], lineno),
                cost=_float_field("cost", rec["cost"], lineno),
                provenance=rec.get("provenance", "user"),
                evaluable=None if rec.get("evaluable", "-") in ("-", "") else rec["evaluable"],
                precision=rec.get("precision", "double"),
            )
            spec = ImplSpec(**values)
        except CatalogError as exc:
            if exc.line is None:
                raise CatalogError(str(exc), lineno) from None
            raise
        raw.append((lineno, spec))
    if not header_seen:
        raise CatalogError(f"missing header {FORMAT_HEADER!r}", 1)

    groups: dict[tuple[str, str], list[tuple[int, ImplSpec]]] = {}
    for lineno, spec in raw:
        groups.setdefault((spec.function, spec.id), []).append((lineno, spec))
    renamed = {}
    for key, members in groups.items():
        if len(members) == 1:
            continue
        domains = [(s.domain_lo, s.domain_hi) for _, s in members]
        if len(set(domains)) != len(domains):
            lineno = members[-1][0]
            raise CatalogError(f"duplicate implementation {key[1]!r} for {key[0]}", lineno)
        for lineno, s in members:
            renamed[lineno] = replace(s, id=f"{s.id}@{s.domain_lo!r}..{s.domain_hi!r}")
    specs = [renamed.get(lineno, s) for lineno, s in raw]
    try:
        return Catalog(specs)
    except CatalogError as exc:
        raise CatalogError(str(exc), None) from None


def load_catalog(path) -> Catalog:
    return loads(Path(path).read_text())


# ---------------------------------------------------------------------------
# measurement


@dataclass(frozen=True)
class Measurement:
    """Sampled accuracy of an evaluable implementation (lower bounds, not sound)."""

    evaluable: str
    domain: tuple[float, float]
    eps: float
    delta: float
    samples: int
    worst_x: float
    sound: bool = False


def sample_points(lo: float, hi: float, samples: int, seed: int = 0) -> np.ndarray:
    """Endpoints, a uniform grid and random points, sorted and deduplicated."""
    n_grid = samples // 2
    rng = np.random.default_rng(seed)
    pts = np.concatenate([[lo, hi], np.linspace(lo, hi, max(n_grid, 2)),
                          rng.uniform(lo, hi, max(samples - n_grid - 2, 0))])
    return np.unique(pts)


def measure_accuracy(evaluable: str, domain: tuple[float, float], samples: int = 10_000,
                     zero_guard: float = 2.0**-20, seed: int = 0) -> Measurement:
    """Maximum sampled absolute and relative error against a 128-bit reference.

    Relative error skips points where ``|f(x)| < zero_guard``.
    """
    impl = get_evaluable(evaluable)
    fn = evaluable_function(evaluable)
    lo, hi = domain
    worst_d, worst_e, worst_x = 0.0, 0.0, lo
    for x in sample_points(lo, hi, samples, seed):
        x = float(x)
        try:
            y = impl(x)
            ref = reference(fn, x)
        except DomainError:
            continue
        err = abs(ref - y)
        d = float(err)
        if d > worst_d:
            worst_d, worst_x = d, x
        if abs(ref) >= zero_guard:
            worst_e = max(worst_e, float(err / abs(ref)))
    return Measurement(evaluable, (lo, hi), worst_e, worst_d, samples, worst_x)


def validate(catalog: Catalog, samples: int = 2000) -> list[str]:
    """Problems found by sampling each evaluable entry against its declared bounds."""
    issues = []
    for spec in catalog:
        if spec.evaluable is None:
            continue
        lo = max(spec.domain_lo, -1e6)
        hi = min(spec.domain_hi, 1e6)
        if spec.function == "exp":
            lo = max(lo, -700.0)
        impl = get_evaluable(spec.evaluable)
        for x in sample_points(lo, hi, samples):
            x = float(x)
            try:
                ref = reference(spec.function, x)
                y = impl(x)
            except DomainError:
                continue
            if float(abs(ref - y)) > spec.eps * float(abs(ref)) + spec.delta:
                issues.append(f"{spec.name}: error at x={x!r} exceeds declared bound")
                break
    return issues


def benchmark_costs(catalog: Catalog, repeat: int = 20000) -> Catalog:
    """Replace costs of evaluable entries with measured ns/call of the Python routine.

    Python timings are dominated by call overhead, so these costs only keep
    a rough relative order; non-evaluable entries keep their listed costs.
    """
    out = []
    for spec in catalog:
        if spec.evaluable is None:
            out.append(spec)
            continue
        impl = get_evaluable(spec.evaluable)
        mid = 0.5 * (max(spec.domain_lo, -1.0) + min(spec.domain_hi, 1.0))
        xs = [mid] * repeat
        t0 = time.perf_counter()
        for x in xs:
            impl(x)
        ns = (time.perf_counter() - t0) / repeat * 1e9
        out.append(replace(spec, cost=max(ns, 1e-3), provenance="measured"))
    return Catalog(out)
