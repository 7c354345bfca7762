import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_criterion():
    def _record(number: int, ok: bool, detail: str) -> None:
        status = "PASS" if ok else "FAIL"
        ACCEPTANCE_LINES.append(f"criterion {number:02d}: {status} - {detail}")
    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
