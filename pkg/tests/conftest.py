import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from optuner import builtin_catalog, linearize, load_benchmark, parse_expression  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def catalog():
    return builtin_catalog()


@pytest.fixture(scope="session")
def povprog():
    expr, inputs = parse_expression(load_benchmark("povprog"))
    return expr, inputs, linearize(expr, [i.name for i in inputs])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def povprog_report(catalog):
    from optuner import tune
    return tune(load_benchmark("povprog"), catalog)


@pytest.fixture(scope="session")
def expsin_report(catalog):
    from optuner import tune
    return tune(load_benchmark("expsin"), catalog)
