import pytest

_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record one pass/fail line for the acceptance summary."""

    def record(number, passed: bool, detail: str, seconds: float):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} ({seconds:.2f} s) {detail}"
        _CRITERIA.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
