import numpy as np
import pytest

from dynmanifold.array_geometry import ArrayGeometry
from dynmanifold.signal_models import reference_signals

FC = 2e9
THETA20 = np.deg2rad(20.0)
THETA30 = np.deg2rad(30.0)


@pytest.fixture(scope="session")
def signals():
    return reference_signals()


@pytest.fixture(scope="session")
def mp(signals):
    return signals["MP"]


@pytest.fixture(scope="session")
def lfm(signals):
    return signals["LFM"]


@pytest.fixture(scope="session")
def sfm(signals):
    return signals["SFM"]


@pytest.fixture(scope="session")
def ula5d():
    """Three elements at [0, 5, 10] half-wavelengths."""
    return ArrayGeometry.from_positions_d([0, 5, 10], FC)


_CRITERIA = []


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for the acceptance summary and assert on it."""

    def record(number: int, title: str, passed: bool, detail: str = ""):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {title}"
        if detail:
            line += f" ({detail})"
        _CRITERIA.append((number, line))
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_CRITERIA):
            terminalreporter.write_line(line)
