from __future__ import annotations

import pytest

from conedex.spectral import WeightedGrid

# populated by test_acceptance; printed once at the end of the session
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def small_grid() -> WeightedGrid:
    return WeightedGrid(nodes=600, decades=4.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
