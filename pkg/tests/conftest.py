import numpy as np
import pytest

from thg.harness import initial_states

# (number, title, passed, detail) tuples appended by the acceptance module
ACCEPTANCE_LINES = []


def draw(schedule, mode, dim, seeds):
    return initial_states(schedule, mode, dim, seeds)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:2d}. {title}: {detail}")
