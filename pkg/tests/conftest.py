import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rppsim.config import SimConfig  # noqa: E402
from rppsim.fixtures import line4  # noqa: E402


@pytest.fixture
def net():
    return line4()


@pytest.fixture
def net_td():
    return line4(time_dependent=True)


@pytest.fixture
def cfg():
    return SimConfig()


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
