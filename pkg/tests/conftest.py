import numpy as np
import pytest

from credirag.graph import PostGraph

_ACCEPTANCE = []


def record_criterion(name: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" -- {detail}" if detail else "")
    _ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


def random_graph(n, p, rng, weights=(-1.0, -0.5, 0.0, 0.5, 1.0)):
    nodes = [f"n{i:02d}" for i in range(n)]
    edges = {}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges[(nodes[i], nodes[j])] = float(rng.choice(weights))
    return PostGraph(nodes, edges)


def random_features(n, d, rng):
    return np.hstack([rng.normal(size=(n, d)), rng.uniform(size=(n, 1)),
                      rng.choice([-1.0, 1.0], size=(n, 1))])


@pytest.fixture
def rng():
    return np.random.default_rng(0)
