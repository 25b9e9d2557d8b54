"""Expression AST, FPCore-subset parser, CSE linearization and evaluation.

Expressions are hash-consed: two structurally identical subtrees are the very
same :class:`Expr` object, so identity comparison doubles as structural
comparison and common subexpression elimination is a memoized walk.
"""

from __future__ import annotations

import math
import struct
import threading
import weakref
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .errors import DomainError, ParseError

# operator -> arity; ``abs`` and ``sqr`` only appear in derived (symbolic)
# expressions, never in parsed programs
ARITY = {
    "add": 2, "sub": 2, "mul": 2, "div": 2,
    "neg": 1, "exp": 1, "log": 1, "sin": 1, "cos": 1, "tan": 1, "atan": 1,
    "abs": 1, "sqr": 1,
}
TUNABLE = frozenset({"exp", "log", "sin", "cos", "tan"})
PROGRAM_OPS = frozenset(ARITY) - {"abs", "sqr"}

_SYMBOLS = {
    "+": "add", "-": "sub", "*": "mul", "/": "div", "neg": "neg",
    "exp": "exp", "log": "log", "sin": "sin", "cos": "cos", "tan": "tan",
    "atan": "atan",
}
_PRINT = {"add": "+", "sub": "-", "mul": "*", "div": "/"}
_NAMED_CONSTANTS = {"PI": math.pi, "E": math.e}


def _bits(x: float) -> int:
    return struct.unpack("<q", struct.pack("<d", x))[0]


class Expr:
    """Immutable, interned expression node.

    Build nodes with :meth:`var`, :meth:`const` and :meth:`call`; never call
    the constructor directly.
    """

    __slots__ = ("op", "args", "name", "value", "exact", "_hash", "__weakref__")

    _table: "weakref.WeakValueDictionary[tuple, Expr]" = weakref.WeakValueDictionary()
    _lock = threading.Lock()

    op: str
    args: tuple["Expr", ...]
    name: str | None
    value: float | None
    exact: bool

    @classmethod
    def _make(cls, op, args=(), name=None, value=None, exact=True):
        key = (op, tuple(id(a) for a in args), name,
               None if value is None else _bits(value), exact)
        with cls._lock:
            node = cls._table.get(key)
            if node is None:
                node = object.__new__(cls)
                object.__setattr__(node, "op", op)
                object.__setattr__(node, "args", tuple(args))
                object.__setattr__(node, "name", name)
                object.__setattr__(node, "value", value)
                object.__setattr__(node, "exact", exact)
                object.__setattr__(node, "_hash", hash(key))
                cls._table[key] = node
        return node

    @classmethod
    def var(cls, name: str) -> Expr:
        return cls._make("var", name=name)

    @classmethod
    def const(cls, value: float, exact: bool = True) -> Expr:
        value = float(value)
        if not math.isfinite(value):
            raise ValueError(f"constants must be finite, got {value!r}")
        return cls._make("const", value=value, exact=exact)

    @classmethod
    def call(cls, op: str, *args: Expr) -> Expr:
        if op not in ARITY:
            raise ValueError(f"unknown operator {op!r}")
        if len(args) != ARITY[op]:
            raise ValueError(f"{op} takes {ARITY[op]} argument(s), got {len(args)}")
        return cls._make(op, args)

    def __setattr__(self, key, value):
        raise AttributeError("Expr is immutable")

    def __hash__(self):
        return self._hash

    def __reduce__(self):
        if self.op == "var":
            return (Expr.var, (self.name,))
        if self.op == "const":
            return (Expr.const, (self.value, self.exact))
        return (Expr.call, (self.op, *self.args))

    @property
    def kind(self) -> str:
        if self.op == "var":
            return "variable"
        if self.op == "const":
            return "constant"
        return "call"

    def free_variables(self) -> list[str]:
        """Variable names in order of first appearance."""
        seen: dict[str, None] = {}
        for node in _postorder(self):
            if node.op == "var":
                seen.setdefault(node.name, None)
        return list(seen)

    def tree_size(self) -> int:
        """Number of operator and constant nodes, counting repeats."""
        memo: dict[int, int] = {}

        def size(e):
            k = id(e)
            if k not in memo:
                own = 0 if e.op == "var" else 1
                memo[k] = own + sum(size(a) for a in e.args)
            return memo[k]

        return size(self)

    def __repr__(self):
        return f"Expr({to_fpcore(self)})"


def _postorder(root: Expr):
    """Distinct nodes of ``root``, children before parents, left to right."""
    out, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if id(node) in seen:
            continue
        if expanded or not node.args:
            seen.add(id(node))
            out.append(node)
        else:
            stack.append((node, True))
            for a in reversed(node.args):
                if id(a) not in seen:
                    stack.append((a, False))
    return out


def to_fpcore(e: Expr) -> str:
    """Render an expression body in FPCore syntax."""
    if e.op == "var":
        return e.name
    if e.op == "const":
        v = e.value
        if v == int(v) and abs(v) < 2**53:
            return str(int(v)) if not (v == 0 and math.copysign(1, v) < 0) else "-0.0"
        return repr(v) if float(repr(v)) == v else v.hex()
    head = _PRINT.get(e.op, e.op)
    return "(" + " ".join([head] + [to_fpcore(a) for a in e.args]) + ")"


# ---------------------------------------------------------------------------
# parsing


@dataclass(frozen=True)
class InputSpec:
    """Declared range ``[lo, hi]`` of one input variable."""

    name: str
    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi) or self.lo > self.hi:
            raise ParseError(f"empty or invalid interval for {self.name}: [{self.lo}, {self.hi}]")


class _Tok(str):
    line: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i, line, n = 0, 1, len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            i += 1
        elif c.isspace():
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()[]":
            t = _Tok({"[": "(", "]": ")"}.get(c, c))
            t.line = line
            toks.append(t)
            i += 1
        elif c == '"':
            j = i + 1
            while j < n and text[j] != '"':
                if text[j] == "\\":
                    j += 1
                j += 1
            if j >= n:
                raise ParseError("unterminated string", line)
            t = _Tok(text[i:j + 1])
            t.line = line
            toks.append(t)
            line += text.count("\n", i, j)
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in '()[];"':
                j += 1
            t = _Tok(text[i:j])
            t.line = line
            toks.append(t)
            i = j
    return toks


def _read(toks: list[_Tok], pos: int):
    if pos >= len(toks):
        raise ParseError("unexpected end of input", toks[-1].line if toks else None)
    tok = toks[pos]
    if tok == ")":
        raise ParseError("unexpected ')'", tok.line)
    if tok != "(":
        return tok, pos + 1
    items = []
    pos += 1
    while True:
        if pos >= len(toks):
            raise ParseError("missing ')'", tok.line)
        if toks[pos] == ")":
            lst = _List(items)
            lst.line = tok.line
            return lst, pos + 1
        item, pos = _read(toks, pos)
        items.append(item)


class _List(list):
    line: int = 0


def _line(sx) -> int | None:
    return getattr(sx, "line", None)


def parse_number(tok: str) -> tuple[float, bool] | None:
    """Parse a decimal or hex-float literal.

    Returns ``(value, exact)`` where ``exact`` says whether the literal is
    exactly representable in binary64, or None if ``tok`` is not a number.
    """
    t = tok.strip()
    neg = t.startswith("-")
    body = t[1:] if t[:1] in "+-" else t
    if body.lower().startswith("0x"):
        try:
            v = float.fromhex(t)
        except ValueError:
            return None
        return v, True
    try:
        v = float(t)
    except ValueError:
        return None
    if not math.isfinite(v) or body.lower() in ("inf", "infinity", "nan"):
        return None
    try:
        exact = Fraction(t) == Fraction(v)
    except (ValueError, ZeroDivisionError):
        return None
    if neg and v == 0:
        v = -0.0
    return v, exact


def _parse_body(sx, env: Mapping[str, Expr]) -> Expr:
    if isinstance(sx, _List):
        if not sx:
            raise ParseError("empty expression", _line(sx))
        head = sx[0]
        if isinstance(head, _List):
            raise ParseError("operator must be a symbol", _line(sx))
        if head in ("let", "let*"):
            if len(sx) != 3 or not isinstance(sx[1], _List):
                raise ParseError(f"malformed {head}", _line(sx))
            inner = dict(env)
            for binding in sx[1]:
                if not (isinstance(binding, _List) and len(binding) == 2
                        and not isinstance(binding[0], _List)):
                    raise ParseError(f"malformed {head} binding", _line(sx))
                value = _parse_body(binding[1], inner if head == "let*" else env)
                inner[str(binding[0])] = value
            return _parse_body(sx[2], inner)
        if head not in _SYMBOLS:
            raise ParseError(f"unsupported operator {head!r}", _line(sx))
        args = [_parse_body(a, env) for a in sx[1:]]
        op = _SYMBOLS[head]
        if op == "sub" and len(args) == 1:
            op = "neg"
        if len(args) != ARITY[op]:
            raise ParseError(f"{head} expects {ARITY[op]} argument(s), got {len(args)}", _line(sx))
        return Expr.call(op, *args)
    tok = str(sx)
    num = parse_number(tok)
    if num is not None:
        return Expr.const(*num)
    if tok in env:
        return env[tok]
    if tok in _NAMED_CONSTANTS:
        return Expr.const(_NAMED_CONSTANTS[tok], exact=False)
    raise ParseError(f"unknown symbol {tok!r}", _line(sx))


def _const_value(sx) -> float:
    """Evaluate a variable-free bound expression such as ``(- PI)``."""
    try:
        e = _parse_body(sx, {})
    except ParseError as exc:
        raise ParseError(f"precondition bound must be a constant: {exc}", _line(sx)) from None
    return eval_expr(e, {})


def _parse_pre(sx, variables: Sequence[str]) -> dict[str, list[float]]:
    bounds = {v: [-math.inf, math.inf] for v in variables}
    clauses = sx[1:] if isinstance(sx, _List) and sx and sx[0] == "and" else [sx]
    for clause in clauses:
        if not (isinstance(clause, _List) and len(clause) >= 3 and clause[0] in ("<=", ">=")):
            raise ParseError("precondition must be a conjunction of closed bounds (<= lo v hi)",
                             _line(clause) or _line(sx))
        terms = list(clause[1:])
        if clause[0] == ">=":
            terms.reverse()
        var_pos = [i for i, t in enumerate(terms) if not isinstance(t, _List) and t in bounds]
        if len(var_pos) != 1 or len(terms) > 3:
            raise ParseError("each bound must mention exactly one input variable", _line(clause))
        i = var_pos[0]
        name = str(terms[i])
        lo, hi = bounds[name]
        if i > 0:
            lo = max(lo, _const_value(terms[i - 1]))
            if i > 1:
                raise ParseError("malformed bound", _line(clause))
        if i < len(terms) - 1:
            hi = min(hi, _const_value(terms[i + 1]))
            if i < len(terms) - 2:
                raise ParseError("malformed bound", _line(clause))
        bounds[name] = [lo, hi]
    return bounds


def parse_expression(text: str) -> tuple[Expr, list[InputSpec]]:
    """Parse ``(FPCore (vars...) :pre (and (<= lo v hi) ...) body)``.

    Returns the expression and one :class:`InputSpec` per argument, in
    argument order.  ``let``/``let*`` are expanded in place.
    """
    toks = _tokenize(text)
    if not toks:
        raise ParseError("empty input")
    sx, pos = _read(toks, 0)
    if pos != len(toks):
        raise ParseError("trailing input after FPCore form", toks[pos].line)
    if not (isinstance(sx, _List) and sx and sx[0] == "FPCore"):
        raise ParseError("expected (FPCore ...)", _line(sx) or 1)
    items = list(sx[1:])
    if items and not isinstance(items[0], _List):
        items = items[1:]  # optional FPCore name
    if not items or not isinstance(items[0], _List):
        raise ParseError("missing argument list", _line(sx))
    variables = [str(v) for v in items[0]]
    if any(isinstance(v, _List) for v in items[0]):
        raise ParseError("annotated arguments are not supported", _line(items[0]))
    if len(set(variables)) != len(variables):
        raise ParseError("duplicate argument name", _line(items[0]))
    rest = items[1:]
    pre = None
    while len(rest) >= 2 and isinstance(rest[0], str) and rest[0].startswith(":"):
        if rest[0] == ":pre":
            pre = rest[1]
        rest = rest[2:]
    if len(rest) != 1:
        raise ParseError("expected exactly one body expression", _line(sx))
    body = _parse_body(rest[0], {v: Expr.var(v) for v in variables})
    bounds = _parse_pre(pre, variables) if pre is not None else {v: [-math.inf, math.inf] for v in variables}
    specs = []
    for v in variables:
        lo, hi = bounds[v]
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ParseError(f"variable without range: {v}", _line(sx))
        specs.append(InputSpec(v, lo, hi))
    unknown = set(body.free_variables()) - set(variables)
    if unknown:
        raise ParseError(f"undeclared variables: {sorted(unknown)}", _line(sx))
    return body, specs


# ---------------------------------------------------------------------------
# linear form

Arg = int | str


@dataclass(frozen=True)
class Node:
    """One assignment ``x_n := op(args)``; int args are node indices, str args inputs."""

    op: str
    args: tuple[Arg, ...]
    expr: Expr = field(repr=False, compare=False)
    value: float | None = None
    exact: bool = True

    @property
    def tunable(self) -> bool:
        return self.op in TUNABLE


@dataclass(frozen=True)
class CallSequence:
    nodes: tuple[Node, ...]
    variables: tuple[str, ...]
    sites: tuple[int, ...]
    labels: tuple[str, ...]

    @property
    def result(self) -> int:
        return len(self.nodes) - 1

    def __len__(self):
        return len(self.nodes)

    def site_index(self, key: int | str) -> int:
        """Node index of a tunable site given its label or node index."""
        if isinstance(key, str):
            try:
                return self.sites[self.labels.index(key)]
            except ValueError:
                raise KeyError(f"no tunable site {key!r}") from None
        if key not in self.sites:
            raise KeyError(f"node {key} is not a tunable site")
        return key

    def label(self, node: int) -> str:
        return self.labels[self.sites.index(node)]

    def arg_expr(self, arg: Arg) -> Expr:
        return Expr.var(arg) if isinstance(arg, str) else self.nodes[arg].expr

    def to_expr(self) -> Expr:
        """Reconstruct the AST (the result node's expression)."""
        built: list[Expr] = []
        for node in self.nodes:
            if node.op == "var":
                built.append(Expr.var(node.args[0]))
            elif node.op == "const":
                built.append(Expr.const(node.value, node.exact))
            else:
                built.append(Expr.call(node.op, *[Expr.var(a) if isinstance(a, str) else built[a]
                                                   for a in node.args]))
        return built[-1]

    def describe(self) -> str:
        lines = []
        for i, n in enumerate(self.nodes):
            if n.op == "const":
                rhs = repr(n.value)
            else:
                rhs = f"{n.op}(" + ", ".join(a if isinstance(a, str) else f"x{a}" for a in n.args) + ")"
            tag = f"  ; site {self.label(i)}" if n.tunable else ""
            lines.append(f"x{i} := {rhs}{tag}")
        return "\n".join(lines)


def linearize(expr: Expr, variables: Sequence[str] | None = None) -> CallSequence:
    """Convert an AST into a deduplicated SSA sequence.

    Structurally equal subtrees map to a single node.  Tunable sites are
    numbered in program order of first occurrence (post-order, left to right).
    """
    if variables is None:
        variables = expr.free_variables()
    index: dict[int, int] = {}
    nodes: list[Node] = []
    for e in _postorder(expr):
        if e.op == "var" and e is not expr:
            continue
        if e.op == "var":
            node = Node("var", (e.name,), e)
        elif e.op == "const":
            node = Node("const", (), e, e.value, e.exact)
        else:
            args = tuple(a.name if a.op == "var" else index[id(a)] for a in e.args)
            node = Node(e.op, args, e)
        index[id(e)] = len(nodes)
        nodes.append(node)
    sites = tuple(i for i, n in enumerate(nodes) if n.tunable)
    counts: dict[str, int] = {}
    labels = []
    for i in sites:
        op = nodes[i].op
        counts[op] = counts.get(op, 0) + 1
        labels.append(f"{op}{counts[op]}")
    return CallSequence(tuple(nodes), tuple(variables), sites, tuple(labels))


# ---------------------------------------------------------------------------
# binary64 evaluation

def _host_exp(x):
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def _host_log(x):
    if x <= 0:
        raise DomainError(f"log of non-positive value {x!r}")
    return math.log(x)


def _div(a, b):
    if b == 0:
        raise DomainError("division by zero")
    return a / b


HOST_MATH: dict[str, Callable[[float], float]] = {
    "exp": _host_exp, "log": _host_log, "sin": math.sin, "cos": math.cos,
    "tan": math.tan, "atan": math.atan,
}


def _apply(op: str, vals, fn=None) -> float:
    if op == "add":
        return vals[0] + vals[1]
    if op == "sub":
        return vals[0] - vals[1]
    if op == "mul":
        return vals[0] * vals[1]
    if op == "div":
        return _div(vals[0], vals[1])
    if op == "neg":
        return -vals[0]
    if op == "abs":
        return abs(vals[0])
    if op == "sqr":
        return vals[0] * vals[0]
    f = fn or HOST_MATH[op]
    try:
        return f(vals[0])
    except ValueError as exc:
        raise DomainError(f"{op}({vals[0]!r}): {exc}") from None


def evaluate(seq: CallSequence, point: Mapping[str, float],
             impl_map: Mapping[int | str, Callable[[float], float]] | None = None) -> float:
    """Evaluate ``seq`` in binary64 at ``point``.

    ``impl_map`` maps tunable sites (label or node index) to callables; sites
    not present use the host math library.
    """
    fns: dict[int, Callable] = {}
    if impl_map:
        for key, fn in impl_map.items():
            fns[seq.site_index(key)] = fn
    vals: list[float] = []
    for i, node in enumerate(seq.nodes):
        if node.op == "var":
            vals.append(float(point[node.args[0]]))
        elif node.op == "const":
            vals.append(node.value)
        else:
            args = [float(point[a]) if isinstance(a, str) else vals[a] for a in node.args]
            vals.append(_apply(node.op, args, fns.get(i)))
    return vals[-1]


def eval_expr(e: Expr, point: Mapping[str, float]) -> float:
    """Direct recursive binary64 evaluation with host math routines."""
    memo: dict[int, float] = {}

    def go(x: Expr) -> float:
        k = id(x)
        if k in memo:
            return memo[k]
        if x.op == "var":
            v = float(point[x.name])
        elif x.op == "const":
            v = x.value
        else:
            v = _apply(x.op, [go(a) for a in x.args])
        memo[k] = v
        return v

    return go(e)
