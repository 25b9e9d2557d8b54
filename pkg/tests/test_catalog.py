import math

import numpy as np
import pytest

from optuner import CatalogError, NotFoundError
from optuner.catalog import (FORMAT_HEADER, Catalog, ImplSpec, dumps, load_catalog, loads,
                             measure_accuracy, save_catalog, validate)
from optuner.implementations import (COS_TABLE, POLY13_COEFFS, SIN_TABLE, poly13_sin, table_index,
                                     table_sin)
from optuner.errors import DomainError

U = 2.0**-52


def test_crlibm_exp(catalog):
    s = catalog.lookup("exp", "CRLibM")
    assert s.eps == 0.5 * U and s.delta == 0.5 * 2.0**-1022
    assert s.cost == 54.02
    assert s.domain_lo <= -1.79e308 and s.domain_hi == 709.78


def test_vdt_reduced(catalog):
    s = catalog.lookup("sin", "VDT-reduced")
    assert (s.domain_lo, s.domain_hi) == (-0.78, 0.78)
    assert s.eps == 5 * U and s.cost == 1.82


def test_lookup_missing(catalog):
    with pytest.raises(NotFoundError):
        catalog.lookup("exp", "nonexistent")


def test_all_double_rows(catalog):
    counts = {fn: len(catalog.for_function(fn)) for fn in ("exp", "log", "sin", "cos", "tan")}
    # library rows plus the locally evaluable approximations
    assert counts == {"exp": 5, "log": 5, "sin": 10, "cos": 8, "tan": 5}
    costs = sorted(s.cost for s in catalog.for_function("tan"))
    assert costs == [8.90, 15.81, 16.00, 28.66, 80.20]


def test_single_precision_rows_stored(catalog):
    rows = catalog.for_function("exp", precision="single")
    assert {s.id for s in rows} == {"rlibm_f32", "glibc_f32", "openlibm_f32", "amd_libm_f32", "vdt_f32"}


def test_roundtrip(catalog, tmp_path):
    path = tmp_path / "c.txt"
    save_catalog(catalog, path)
    assert load_catalog(path) == catalog
    assert path.read_text().startswith(FORMAT_HEADER)


def test_hex_values_accepted():
    text = (f"{FORMAT_HEADER}\n"
            "function=sin id=mine domain_lo=-0x1p+1 domain_hi=0x1p+1 eps=0x1p-50 delta=0 cost=3\n")
    s = loads(text).lookup("sin", "mine")
    assert (s.domain_lo, s.domain_hi, s.eps) == (-2.0, 2.0, 2.0**-50)
    assert s.provenance == "user"


@pytest.mark.parametrize("line, fragment", [
    ("function=sin id=a domain_lo=-1 domain_hi=1 eps=0 delta=0 cost=-1", "cost"),
    ("function=sin id=a domain_lo=1 domain_hi=-1 eps=0 delta=0 cost=1", "empty domain"),
    ("function=sinh id=a domain_lo=-1 domain_hi=1 eps=0 delta=0 cost=1", "unsupported"),
    ("function=sin id=a domain_lo=-1 domain_hi=1 eps=x delta=0 cost=1", "not a number"),
    ("function=sin id=a domain_lo=-1 domain_hi=1 eps=0 delta=0", "missing"),
])
def test_bad_records(line, fragment):
    with pytest.raises(CatalogError, match=fragment) as info:
        loads(f"{FORMAT_HEADER}\n{line}\n")
    assert info.value.line == 2


def test_missing_header():
    with pytest.raises(CatalogError, match="header"):
        loads("function=sin id=a domain_lo=-1 domain_hi=1 eps=0 delta=0 cost=1\n")


def test_same_id_two_domains():
    text = (f"{FORMAT_HEADER}\n"
            "function=sin id=lib domain_lo=-1 domain_hi=1 eps=1e-16 delta=0 cost=1\n"
            "function=sin id=lib domain_lo=-4 domain_hi=4 eps=1e-15 delta=0 cost=1\n")
    c = loads(text)
    ids = sorted(s.id for s in c)
    assert len(ids) == 2 and all(i.startswith("lib@") for i in ids) and ids[0] != ids[1]


def test_duplicate_id_same_domain():
    rec = "function=sin id=lib domain_lo=-1 domain_hi=1 eps=0 delta=0 cost=1\n"
    with pytest.raises(CatalogError, match="duplicate"):
        loads(FORMAT_HEADER + "\n" + rec + rec)


def test_evaluable_function_mismatch():
    with pytest.raises(CatalogError, match="different function"):
        ImplSpec("cos", "x", -1, 1, 0, 1, 1, evaluable="identity:sin")


def test_builtin_poly_coefficients():
    assert POLY13_COEFFS[0] == float.fromhex("0x1.52a851954275cp-33")
    assert POLY13_COEFFS[-1] == float.fromhex("0x1.ffffffffffdc9p-1")


def test_table_construction():
    assert len(SIN_TABLE) == len(COS_TABLE) == 255
    assert SIN_TABLE[127] == 0.0 and COS_TABLE[127] == 1.0
    assert SIN_TABLE[254] == math.sin(127 * math.pi / 127.0)
    # index truncates after the +127 shift, as the C expression does
    assert table_index(0.0) == 127
    assert table_index(-0.001) == 126
    assert table_sin(math.pi) == SIN_TABLE[254]
    with pytest.raises(DomainError):
        table_sin(3.2)


def test_measure_identity_sin():
    m = measure_accuracy("identity:sin", (-math.pi, math.pi), samples=4000)
    assert m.delta == pytest.approx(math.pi, rel=1e-6)
    assert not m.sound


def test_measure_negated_identity_cos():
    m = measure_accuracy("negidentity:cos", (-math.pi, math.pi), samples=4000)
    assert m.delta == pytest.approx(math.pi + 1, rel=1e-6)


def test_measure_table_sin():
    m = measure_accuracy("table255:sin", (-math.pi, math.pi), samples=20000)
    assert m.delta == pytest.approx(0.02473, rel=2e-3)


def test_declared_bounds_cover_measurements(catalog):
    assert validate(catalog, samples=3000) == []
    for s in catalog:
        if s.evaluable and s.provenance == "measured":
            m = measure_accuracy(s.evaluable, (s.domain_lo, s.domain_hi), samples=3000)
            assert m.delta <= s.delta


def test_poly13_accuracy_by_domain():
    from optuner.implementations import reference
    xs = np.linspace(-1.5708, 1.5708, 2001)
    worst = max(float(abs(reference("sin", float(x)) - poly13_sin(float(x)))) for x in xs)
    assert worst < 7e-14


def test_spec_call_checks_domain(catalog):
    s = catalog.lookup("sin", "table255")
    assert s(0.5) == table_sin(0.5)
    with pytest.raises(DomainError):
        s(3.5)
    with pytest.raises(NotFoundError):
        catalog.lookup("sin", "crlibm")(0.5)


def test_catalog_rejects_duplicates():
    s = ImplSpec("sin", "a", -1, 1, 0, 1, 1)
    with pytest.raises(CatalogError):
        Catalog([s, s])


def test_dumps_is_deterministic(catalog):
    assert dumps(catalog) == dumps(loads(dumps(catalog)))
