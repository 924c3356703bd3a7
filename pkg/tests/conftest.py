import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    def emit(number: int, ok: bool, detail: str):
        line = "criterion %2d: %s  %s" % (number, "PASS" if ok else "FAIL", detail)
        ACCEPTANCE_LINES.append(line)
        print(line)

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
