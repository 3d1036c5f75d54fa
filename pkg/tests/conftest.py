import pytest

# (criterion id, passed, detail) collected by test_acceptance.py
ACCEPTANCE = []


@pytest.fixture
def record_acceptance():
    def record(cid, passed, detail):
        ACCEPTANCE.append((cid, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid, passed, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {cid}: {detail}")
