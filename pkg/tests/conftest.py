import sys

import pytest

from acqret import _atomics


@pytest.fixture
def fast_switch():
    """Make the interpreter switch threads far more often than the default."""
    old = sys.getswitchinterval()
    sys.setswitchinterval(1e-6)
    yield
    sys.setswitchinterval(old)


@pytest.fixture(autouse=True)
def _no_leftover_hook():
    yield
    assert _atomics._hook is None, "a test leaked a schedule hook"
    _atomics.set_schedule_hook(None)


def pytest_terminal_summary(terminalreporter):
    from _report import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
