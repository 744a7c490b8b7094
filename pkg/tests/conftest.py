import pytest

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance_line():
    def record(number: int, ok: bool | None, detail: str) -> str:
        status = {True: "PASS", False: "FAIL", None: "WARN"}[ok]
        line = f"criterion {number}: {status}  {detail}"
        ACCEPTANCE[number] = line
        print(line)
        return line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
