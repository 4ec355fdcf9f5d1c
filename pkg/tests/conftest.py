import pytest

# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def report():
    def _report(tag: str, passed: bool, detail: str) -> bool:
        line = f"{tag} {'PASS' if passed else 'FAIL'} {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return _report
