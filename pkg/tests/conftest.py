from pathlib import Path

import numpy as np
import pytest

from sbsgeom.sections import BinaryForm

DATA = Path(__file__).parent / "data"

# acceptance criteria register "PASS"/"FAIL" lines here; printed at the end
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def p3() -> BinaryForm:
    return BinaryForm((1, 0, 0, -1))


@pytest.fixture
def data_dir() -> Path:
    return DATA


def random_form(rng: np.random.Generator, d: int) -> BinaryForm:
    return BinaryForm(tuple(rng.normal(size=d + 1) + 1j * rng.normal(size=d + 1)))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
