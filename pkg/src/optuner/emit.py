"""C source for a tuned configuration.

The emitted routine evaluates the call sequence operation by operation in
``double``; compile it with ``-ffp-contract=off`` so that no multiply-add
is fused and results match :func:`optuner.expr.evaluate` bit for bit.
"""

from __future__ import annotations

import re
from typing import Mapping

from .catalog import ImplSpec
from .expr import CallSequence
from .implementations import C_SOURCES

_C_OPS = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


def c_identifier(name: str) -> str:
    ident = re.sub(r"[^A-Za-z0-9_]", "_", name)
    if not ident or ident[0].isdigit():
        ident = "_" + ident
    return ident


def external_symbol(spec: ImplSpec) -> str:
    return c_identifier(f"{spec.id}_{spec.function}")


def _literal(x: float) -> str:
    return x.hex() if x == x and abs(x) != float("inf") else repr(x)


def emit_c(seq: CallSequence, selection: Mapping[str, ImplSpec], name: str = "optuner_kernel") -> str:
    """A self-contained C translation unit defining ``double name(inputs...)``.

    Evaluable built-ins are inlined, libm entries call ``<math.h>`` and every
    other implementation becomes an ``extern`` declaration named
    ``<impl_id>_<function>``.
    """
    missing = [l for l in seq.labels if l not in selection]
    if missing:
        raise KeyError(f"selection misses sites {missing}")
    externs: dict[str, str] = {}
    support: dict[str, str] = {}
    callee: dict[int, str] = {}
    for label, spec in selection.items():
        site = seq.site_index(label)
        if spec.function != seq.nodes[site].op:
            raise ValueError(f"{spec.name} cannot implement {seq.nodes[site].op} at {label}")
        if spec.evaluable is not None:
            fname, src = C_SOURCES[spec.evaluable]
            if src:
                support[spec.evaluable] = src
            callee[site] = fname
        else:
            sym = external_symbol(spec)
            externs[sym] = f"extern double {sym}(double);"
            callee[site] = sym

    # temporaries are _t<k>; keep parameters out of that namespace
    params = {v: c_identifier(v) + ("_" if re.fullmatch(r"_t\d+", c_identifier(v)) else "")
              for v in seq.variables}
    out = ["#include <math.h>", "", "#ifndef M_PI", "#define M_PI 3.14159265358979323846", "#endif", ""]
    out += sorted(externs.values())
    if externs:
        out.append("")
    for src in support.values():
        out.append(src)
    sig = ", ".join(f"double {p}" for p in params.values()) or "void"
    out.append(f"double {c_identifier(name)}({sig}) {{")

    def ref(a):
        return params[a] if isinstance(a, str) else f"_t{a}"

    for k, node in enumerate(seq.nodes):
        if node.op == "var":
            rhs = ref(node.args[0])
        elif node.op == "const":
            rhs = _literal(node.value)
        elif node.op in _C_OPS:
            rhs = f"{ref(node.args[0])} {_C_OPS[node.op]} {ref(node.args[1])}"
        elif node.op == "neg":
            rhs = f"-{ref(node.args[0])}"
        elif node.tunable:
            rhs = f"{callee[k]}({ref(node.args[0])})"
        else:
            rhs = f"{node.op}({ref(node.args[0])})"
        out.append(f"  double _t{k} = {rhs};")
    out.append(f"  return _t{seq.result};")
    out.append("}")
    return "\n".join(out) + "\n"
