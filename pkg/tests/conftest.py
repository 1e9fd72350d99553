import numpy as np
import pytest

from dtncomplete.mesh_fem import build_disk_mesh, default_rings


@pytest.fixture(scope="session")
def mesh32():
    return build_disk_mesh(32, default_rings(32))


@pytest.fixture(scope="session")
def mesh16():
    return build_disk_mesh(16, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES):
            terminalreporter.write_line(line)
