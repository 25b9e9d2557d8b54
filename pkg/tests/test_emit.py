import math
import random
import shutil
import subprocess

import pytest

from optuner import emit_c, evaluate, linearize, parse_expression
from optuner.emit import c_identifier, external_symbol


def selection(catalog, seq, ids):
    return {l: catalog.lookup(seq.nodes[seq.site_index(l)].op, ids[l]) for l in seq.labels}


def test_poly_coefficients_inlined(catalog, povprog):
    _, _, seq = povprog
    sel = selection(catalog, seq, {"cos1": "glibc", "cos2": "glibc",
                                   "sin1": "poly13_wide", "sin2": "poly13_wide"})
    src = emit_c(seq, sel)
    assert "0x1.52a851954275cp-33" in src
    assert src.count("extern") == 0


def test_external_declarations(catalog, povprog):
    _, _, seq = povprog
    sel = selection(catalog, seq, {l: "crlibm" for l in seq.labels})
    src = emit_c(seq, sel)
    # one declaration per distinct symbol, one call per site
    assert src.count("extern double") == 2
    assert "extern double crlibm_sin(double);" in src
    assert src.count("crlibm_cos(") == 3 and src.count("crlibm_sin(") == 3


def test_no_calls_is_pure_arithmetic():
    e, inputs = parse_expression("(FPCore (x y) :pre (and (<= 0 x 1) (<= 0 y 1)) (* (+ x y) 2))")
    src = emit_c(linearize(e), {})
    body = src.split("optuner_kernel", 1)[1]
    assert "_t0 = x + y;" in body and "_t2 = _t0 * _t1;" in body
    assert "extern" not in src and "(_t" not in body


def test_selection_must_cover_sites(catalog, povprog):
    _, _, seq = povprog
    with pytest.raises(KeyError):
        emit_c(seq, {})


def test_parameter_named_like_temporary():
    e, inputs = parse_expression("(FPCore (_t0 y) :pre (and (<= 0 _t0 1) (<= 0 y 1)) (+ _t0 y))")
    src = emit_c(linearize(e), {})
    assert "double _t0_, double y" in src and "_t0 = _t0_ + y;" in src


def test_identifiers():
    assert c_identifier("a-b") == "a_b" and c_identifier("1x") == "_1x"
    from optuner import ImplSpec
    assert external_symbol(ImplSpec("sin", "amd_libm", -1, 1, 0, 0, 1)) == "amd_libm_sin"


DRIVER = r"""
#include <stdio.h>
#include <stdlib.h>
int main(void) {
  double t, p, a, b, c;
  while (scanf("%la %la %la %la %la", &t, &p, &a, &b, &c) == 5)
    printf("%a\n", optuner_kernel(%ARGS%));
  return 0;
}
"""


@pytest.mark.skipif(shutil.which("gcc") is None, reason="gcc not available")
@pytest.mark.parametrize("ids", [
    {"cos1": "table255", "cos2": "table255", "sin1": "table255", "sin2": "table255"},
    {"cos1": "negidentity", "cos2": "glibc", "sin1": "poly13_wide", "sin2": "identity"},
])
def test_compiled_matches_evaluate(catalog, povprog, tmp_path, ids):
    _, inputs, seq = povprog
    sel = selection(catalog, seq, ids)
    names = [c_identifier(v) for v in seq.variables]
    src = emit_c(seq, sel) + DRIVER.replace("%ARGS%", ", ".join(names))
    # the driver reads the five inputs in a fixed order
    order = [i.name for i in inputs]
    src = src.replace("double t, p, a, b, c;", "double " + ", ".join(names) + ";")
    src = src.replace("&t, &p, &a, &b, &c", ", ".join("&" + c_identifier(n) for n in order))
    (tmp_path / "k.c").write_text(src)
    subprocess.run(["gcc", "-O0", "-ffp-contract=off", "-o", str(tmp_path / "k"),
                    str(tmp_path / "k.c"), "-lm"], check=True)
    rng = random.Random(3)
    pts = [{i.name: rng.uniform(i.lo, i.hi) for i in inputs} for _ in range(1000)]
    stdin = "\n".join(" ".join(p[n].hex() for n in order) for p in pts)
    out = subprocess.run([str(tmp_path / "k")], input=stdin, capture_output=True, text=True,
                         check=True).stdout.split()
    assert len(out) == len(pts)
    impl = {l: s.__call__ for l, s in sel.items()}
    for p, got in zip(pts, out):
        want = evaluate(seq, p, impl)
        assert float.fromhex(got) == want or (math.isnan(want) and got == "nan")
