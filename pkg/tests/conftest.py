import re

import pytest

LINES = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[LINES] = {}


@pytest.fixture
def criterion(request):
    """Record one pass/fail line per numbered acceptance criterion.

    The number comes from the test name (``test_criterion_07_...``).  A test
    that raises before recording still gets a FAIL line.
    """
    num = int(re.match(r"test_criterion_(\d+)", request.node.name).group(1))
    lines = request.config.stash[LINES]

    def record(title, passed, detail=""):
        lines[num] = f"criterion {num:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        return passed

    yield record
    lines.setdefault(num, f"criterion {num:2d} FAIL  raised before a verdict")


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(LINES, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for num in sorted(lines):
            terminalreporter.write_line(lines[num])
