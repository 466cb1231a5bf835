"""Shared pytest wiring: collects the numbered acceptance-check lines so the
terminal summary shows one PASS/FAIL line per criterion."""

import pytest

ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance():
    def record(num, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {num:2d}: {detail}"
        print(line)
        ACCEPTANCE.append((num, line))
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE):
        terminalreporter.write_line(line)
