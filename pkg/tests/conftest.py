import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from saddlelab.objectives import (
    cubic_perturbed,
    quadratic_form,
    trig_multiwell,
)

# one line per acceptance criterion, printed in the terminal summary so
# the verdicts survive pytest's output capture
_criterion_lines: list[str] = []


def record_criterion(number: int, name: str, ok: bool) -> None:
    _criterion_lines.append(
        f"criterion {number:2d} ({name}): {'PASS' if ok else 'FAIL'}")


def pytest_terminal_summary(terminalreporter, exitstatus):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in _criterion_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def f_saddle():
    """The reference planar saddle, eigenvalues {1, -1}."""
    return quadratic_form(np.diag([1.0, -1.0]))


@pytest.fixture(scope="session")
def f_bowl():
    """Isotropic planar minimum."""
    return quadratic_form(np.eye(2))


@pytest.fixture(scope="session")
def f_cubic():
    return cubic_perturbed(np.array([1.0, -1.0]), 0.5)


@pytest.fixture(scope="session")
def f_trig2():
    return trig_multiwell(2)
