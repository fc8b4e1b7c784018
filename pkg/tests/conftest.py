import numpy as np
import pytest

from vtomo.fields import Grid
from vtomo.geometry import LineGrid
from vtomo import phantoms


@pytest.fixture(scope="session")
def grid():
    return Grid(128)


@pytest.fixture(scope="session")
def lines():
    return LineGrid(360, 256)


@pytest.fixture(scope="session")
def small_grid():
    return Grid(32)


@pytest.fixture(scope="session")
def small_lines():
    return LineGrid(64, 48)


@pytest.fixture(scope="session")
def named(grid):
    """Default phantoms with analytic parts on the N = 128 grid."""
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = phantoms.make_with_parts(phantoms.default_spec(name), grid)
        return cache[name]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        title, ok, detail = results[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d} {title}: {detail}")
