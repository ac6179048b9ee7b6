import numpy as np
import pytest

from pfreal.network import complete_graph, cycle_graph
from pfreal.solver import build_start_set

_CACHE = {}


def start_set_for(kind: str, n: int, bipartite: bool = True, seed: int = 0):
    key = (kind, n, bipartite, seed)
    if key not in _CACHE:
        net = cycle_graph(n) if kind == "cycle" else complete_graph(n)
        _CACHE[key] = build_start_set(net, seed=seed, bipartite=bipartite)
    return _CACHE[key]


@pytest.fixture(scope="session")
def starts():
    return start_set_for


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
