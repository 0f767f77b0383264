import pytest

_LINES = []


@pytest.fixture
def acceptance_record():
    def record(crit, ok, detail):
        _LINES.append((crit, ok, detail))
    return record


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for crit, ok, detail in sorted(_LINES):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {crit}: {detail}")
