import numpy as np
import pytest

from looptrees.trees import PlaneTree


def random_plane_tree(rng: np.random.Generator, n: int) -> PlaneTree:
    """Uniform-attachment plane tree with n vertices (tests only need validity)."""
    if n == 1:
        return PlaneTree((0,))
    parent = np.zeros(n, dtype=np.int64)
    for i in range(1, n):
        parent[i] = rng.integers(0, i)
    children = [[] for _ in range(n)]
    for i in range(1, n):
        children[parent[i]].append(i)
    deg = []
    stack = [0]
    while stack:
        v = stack.pop()
        deg.append(len(children[v]))
        stack.extend(reversed(children[v]))
    return PlaneTree(tuple(deg))


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)


# one line per acceptance criterion, echoed after the run so capture
# never hides them (test_acceptance appends via acceptance_line)
ACCEPTANCE_LINES = []


def acceptance_line(text: str) -> None:
    ACCEPTANCE_LINES.append(text)
    print(text)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
