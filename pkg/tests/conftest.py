from pathlib import Path

import pytest

from rdgcn.conllu import DepTree

DATA = Path(__file__).parent / "data"


def tree_from_heads(heads, deprels=None):
    n = len(heads)
    return DepTree.from_lists([f"w{i}" for i in range(n)], heads, deprels or ["dep"] * n)


def path_tree(n):
    """w0 -- w1 -- ... -- w(n-1), rooted at w0."""
    return tree_from_heads([0] + list(range(1, n)))


@pytest.fixture
def data_dir():
    return DATA


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
