import numpy as np
import pytest

from crowdirt import CrowdSpec, PriorSpec, ResponseMatrix, ViConfig, fit_mml, fit_vi, simulate

REFERENCE_SEED = 7


def matrix(rows, subjects=None, items=None):
    """Build a ResponseMatrix from nested lists; None marks a missing cell."""
    cells = np.array([[-1 if c is None else c for c in r] for r in rows], dtype=np.int8)
    J, I = cells.shape
    return ResponseMatrix(
        tuple(subjects or (f"s{j}" for j in range(J))),
        tuple(items or (f"i{i}" for i in range(I))),
        cells,
    )


@pytest.fixture(scope="session")
def reference_crowd():
    """1000 subjects x 100 items, theta and b ~ N(0, 1)."""
    return simulate(CrowdSpec(1000, 100, seed=REFERENCE_SEED))


@pytest.fixture(scope="session")
def reference_mml(reference_crowd):
    return fit_mml(reference_crowd[0])


@pytest.fixture(scope="session")
def reference_vi(reference_crowd):
    return fit_vi(reference_crowd[0], PriorSpec("hierarchical"), ViConfig(seed=REFERENCE_SEED))


@pytest.fixture(scope="session")
def reference_vi_vague(reference_crowd):
    return fit_vi(reference_crowd[0], PriorSpec("vague"), ViConfig(seed=REFERENCE_SEED))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
