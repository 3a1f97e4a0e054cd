import pytest

# acceptance lines collected by test_acceptance.record(), echoed at the end of the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)


@pytest.fixture
def record():
    def _record(name, ok, detail):
        line = f"{name} {'PASS' if ok else 'FAIL'}: {detail}"
        ACCEPTANCE.append(line)
        print(line)
        return ok
    return _record
