import pytest

# (criterion number, title, passed, detail) collected by the acceptance module
ACCEPTANCE_LINES: list[tuple[int, str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, ok, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num}. {title} -- {detail}")


@pytest.fixture
def record_criterion():
    def record(num: int, title: str, ok: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append((num, title, bool(ok), detail))

    return record
