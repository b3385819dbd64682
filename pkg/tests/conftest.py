"""Shared test configuration.

Provides the ``record_criterion`` fixture used by the acceptance tests
to emit exactly one pass/fail line per criterion, and echoes those
lines in a dedicated terminal section after the run so they are always
visible, even without ``-s``.
"""
import pytest

try:
    from hypothesis import settings

    settings.register_profile("suite", deadline=None, max_examples=25)
    settings.load_profile("suite")
except ImportError:
    pass

_CRITERION_LINES = []


@pytest.fixture
def record_criterion():
    """Record one acceptance-criterion result line."""

    def _record(line):
        line = str(line)
        _CRITERION_LINES.append(line)
        print(line)

    return _record


def pytest_terminal_summary(terminalreporter):
    if _CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERION_LINES):
            terminalreporter.write_line(line)
