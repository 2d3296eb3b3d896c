import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gppa import delta  # noqa: E402


@pytest.fixture(scope="session")
def delta_default():
    cfg = delta.DeltaConfig()
    table, model, means = delta.b_coefficients(cfg)
    return cfg, table, model, means


@pytest.fixture(scope="session")
def resonance(delta_default):
    cfg, table, _, _ = delta_default
    return delta.resonance_locate(cfg, 1, table=table)


CRITERIA = {}


def record(number, ok, detail):
    """Store one acceptance verdict for the end-of-run summary."""
    CRITERIA[number] = (ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        ok, detail = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
