import pytest

_LINES: dict = {}


@pytest.fixture
def record():
    """record(n, ok, detail) files one acceptance line for criterion n."""
    def _record(n: int, ok: bool, detail: str) -> bool:
        _LINES[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(_LINES[n])
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_LINES):
        terminalreporter.write_line(_LINES[n])
