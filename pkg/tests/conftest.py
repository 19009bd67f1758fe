from pathlib import Path

import pytest

from rieszlab.oracle import load_fixtures

FIXTURES = Path(__file__).parent / "fixtures" / "derived.json"
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def derived():
    return load_fixtures(FIXTURES)


@pytest.fixture
def record():
    def _record(number: int, title: str, ok: bool, detail: str = ""):
        ACCEPTANCE_LINES[number] = f"{'PASS' if ok else 'FAIL'} criterion {number:2d} {title}: {detail}"
        print(ACCEPTANCE_LINES[number])
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
