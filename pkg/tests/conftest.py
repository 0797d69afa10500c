import numpy as np
import pytest

from grbm.domain import ReflectionData, orthant
from grbm.presets import wedge_data

ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {detail}")


@pytest.fixture
def wedge():
    return wedge_data()


@pytest.fixture
def hr_orthant():
    return orthant([[0.0, -0.4], [-0.2, 0.0]], [1.0, 1.0], [[1.0, -0.3], [-0.3, 1.0]])


@pytest.fixture
def four_face_data():
    """Four faces in the plane with ``q_j = c R n_j``; skew-symmetric for every ``c``."""
    angles = np.deg2rad([0.0, 70.0, 160.0, 235.0])
    N = np.column_stack([np.cos(angles), np.sin(angles)])
    R = np.array([[0.0, -1.0], [1.0, 0.0]])
    return ReflectionData(N=N, Q=0.3 * N @ R.T, b=np.zeros(4), mu=[0.4, 0.7])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
