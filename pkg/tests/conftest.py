import pytest

from qsdlab import kummer

ACCEPTANCE_LINES = []


@pytest.fixture
def params():
    """Shorthand constructor for Kummer parameters."""
    return kummer.KummerParams


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
