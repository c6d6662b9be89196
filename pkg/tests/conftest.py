import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import scene  # noqa: E402

# acceptance verdicts, printed together at the end of the run
VERDICTS: list[str] = []


@pytest.fixture
def scene0():
    return scene(0)


@pytest.fixture
def verdict(request):
    """Record and print one PASS/FAIL line, then fail the test if the check failed."""
    def check(number: int, title: str, ok: bool, detail: str = ""):
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title}" + (f" ({detail})" if detail else "")
        VERDICTS.append(line)
        capman = request.config.pluginmanager.getplugin("capturemanager")
        with capman.global_and_fixture_disabled():
            print("\n" + line)
        assert ok, line
    return check


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS):
            terminalreporter.write_line(line)
