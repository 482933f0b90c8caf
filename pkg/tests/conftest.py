import numpy as np
import pytest

from scquery.model import ClusteringMatrix, animal_matrix

# Reference responses for the seven animals (upper triangle mirrored), row order TS GB BW BD GO Os KD.
ANIMAL_RESPONSES = np.array(
    [
        [0, 0, 1, 0, 1, 1, 1],
        [0, 0, 1, 1, 0, 1, 1],
        [1, 1, 0, 1, 1, 0, 0],
        [0, 1, 1, 0, 0, 1, 1],
        [1, 0, 1, 0, 0, 1, 1],
        [1, 1, 0, 1, 1, 0, 1],
        [1, 1, 0, 1, 1, 1, 0],
    ]
)

CYCLE_A = np.array(
    [
        [1, 1, 0, 0, 0, 0],
        [0, 1, 1, 0, 0, 0],
        [0, 0, 1, 1, 0, 0],
        [0, 0, 0, 1, 1, 0],
        [0, 0, 0, 0, 1, 1],
        [1, 0, 0, 0, 0, 1],
    ]
)

CYCLE_B = np.array(
    [
        [1, 0, 0, 1, 0, 0],
        [1, 1, 0, 0, 0, 0],
        [0, 1, 1, 0, 0, 0],
        [0, 0, 1, 0, 1, 0],
        [0, 0, 0, 0, 1, 1],
        [0, 0, 0, 1, 0, 1],
    ]
)

ACCEPTANCE_LINES = {}


@pytest.fixture
def animals():
    return animal_matrix()


@pytest.fixture
def cycle_pair():
    return (
        ClusteringMatrix(CYCLE_A, ensemble="uniform", delta=2),
        ClusteringMatrix(CYCLE_B, ensemble="uniform", delta=2),
    )


@pytest.fixture
def report():
    """Record a pass/fail line for an acceptance criterion."""

    def record(number, name, passed, detail):
        ACCEPTANCE_LINES.setdefault(number, []).append((name, bool(passed), detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        parts = ACCEPTANCE_LINES[number]
        ok = all(p for _, p, _ in parts)
        detail = "; ".join(f"{name}: {'ok' if p else 'miss'} ({d})" for name, p, d in parts)
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'} | {detail}")
