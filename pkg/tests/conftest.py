import numpy as np
import pytest

from nodemoe.graph import build_graph


def random_graph(n, p, rng):
    """Erdos-Renyi G(n, p) built through build_graph."""
    iu = np.triu_indices(n, 1)
    keep = rng.random(len(iu[0])) < p
    return build_graph(np.stack([iu[0][keep], iu[1][keep]], axis=1), n)


def two_bridged_cliques(size=10):
    edges = [(i, j) for i in range(size) for j in range(i + 1, size)]
    edges += [(i + size, j + size) for i, j in edges]
    edges.append((size - 1, size))
    return build_graph(edges, 2 * size)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def record_criterion(number, ok, detail):
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
