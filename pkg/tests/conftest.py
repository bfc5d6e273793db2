import pytest

_LINES = []


@pytest.fixture
def verdict():
    """Record a one-line PASS/FAIL verdict, echo it, then assert."""

    def record(criterion: int, ok: bool, detail: str) -> None:
        line = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance verdicts")
        for line in sorted(_LINES):
            terminalreporter.write_line(line)
