import numpy as np
import pytest

from bankgcn.checks import random_graph
from bankgcn.graph import build_graph


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def p2():
    return build_graph(2, [(0, 1, 1.0)], np.array([[1.0], [0.0]]))


@pytest.fixture
def k3():
    return build_graph(3, [(0, 1), (1, 2), (0, 2)], np.eye(3))


def make_graphs(rng, count, n=8, d=3, num_classes=2):
    return [random_graph(rng, n, p=0.4, d=d, label=k % num_classes) for k in range(count)]


TU_FIXTURE = {
    "A": "1, 2\n2, 1\n3, 4\n4, 3\n4, 5\n5, 4\n3, 5\n5, 3\n",
    "graph_indicator": "1\n1\n2\n2\n2\n",
    "graph_labels": "0\n1\n",
    "node_labels": "0\n1\n1\n0\n1\n",
}


def write_fixture(directory, name="FIX", files=None, **extra):
    files = dict(TU_FIXTURE if files is None else files)
    files.update(extra)
    for suffix, body in files.items():
        if body is not None:
            (directory / f"{name}_{suffix}.txt").write_text(body)
    return directory


ACCEPTANCE_LINES = []


def record_criterion(number, title, passed, detail):
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
