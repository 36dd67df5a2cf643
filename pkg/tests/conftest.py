import pytest

from pnpbell.bell import make_chsh

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def chsh():
    return make_chsh()


@pytest.fixture
def report():
    """Record one acceptance line, then assert it."""

    def _record(criterion: int, ok: bool, detail: str):
        status = "PASS" if ok else "FAIL"
        ACCEPTANCE_LINES[criterion] = f"criterion {criterion:2d}: {status}  {detail}"
        print(ACCEPTANCE_LINES[criterion])
        assert ok, detail

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
