from pathlib import Path

import numpy as np
import pytest

from bfms.fspace import FunctionSet, GridSpec

DATA = Path(__file__).parent / "data"

_acceptance_lines = []


def record_acceptance(number, name, passed, detail=""):
    line = f"[{number:>2}] {'PASS' if passed else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
    _acceptance_lines.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_acceptance_lines):
        terminalreporter.write_line(line)


@pytest.fixture
def unit_grid():
    return GridSpec(0.0, 1.0, 101)


def random_set(n, p=30, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    return FunctionSet(GridSpec(0.0, 1.0, p), scale * rng.standard_normal((n, p)))
