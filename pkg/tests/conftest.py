import pytest

#: (criterion number, PASS/FAIL, detail) lines collected by the acceptance suite
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for num, verdict, detail in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(f"criterion {num:2d}: {verdict}  {detail}")


@pytest.fixture
def acceptance():
    def record(num, ok, detail):
        verdict = "PASS" if ok else "FAIL"
        ACCEPTANCE_LINES.append((num, verdict, detail))
        print(f"criterion {num}: {verdict}  {detail}")
        return ok
    return record
