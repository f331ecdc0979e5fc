import numpy as np
import pytest

from latentfem.material import water
from latentfem.mesh import build_line_mesh


@pytest.fixture
def line_mesh():
    return build_line_mesh(1.0, 10)


@pytest.fixture
def ice():
    return water()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
