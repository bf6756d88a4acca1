import numpy as np
import pytest

from fairdegrade import Dataset, ProtectedGroups


def random_instance(rng, n, d, f=2, grid=None):
    """Random points with every one of ``f`` groups represented.

    With ``grid`` the coordinates are integers in [0, grid), which produces
    duplicate points and exact distance ties.
    """
    if grid:
        pts = rng.integers(0, grid, size=(n, d)).astype(float)
    else:
        pts = rng.uniform(0, 10, size=(n, d))
    groups = np.concatenate([np.arange(f), rng.integers(0, f, size=n - f)])
    rng.shuffle(groups)
    return Dataset(pts), ProtectedGroups(groups)


@pytest.fixture
def four_points():
    ds = Dataset(np.array([[0.0], [1.0], [10.0], [11.0]]))
    pg = ProtectedGroups(np.array([0, 1, 0, 1]))
    return ds, pg


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL/SKIP line per acceptance criterion."""

    def record(number: int, verdict: str, detail: str) -> str:
        line = f"criterion {number}: {verdict}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
