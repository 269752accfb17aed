"""Collects the acceptance verdicts and prints them after the run."""

import pytest

_VERDICTS: list[tuple[int, bool, str]] = []


@pytest.fixture
def verdict(capsys):
    """``verdict(n, ok, detail)`` records and prints one line, then asserts ``ok``."""

    def record(n: int, ok: bool, detail: str):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'} | {detail}"
        _VERDICTS.append((n, bool(ok), line))
        with capsys.disabled():
            print(f"\n    {line}")
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, _, line in sorted(_VERDICTS, key=lambda v: v[0]):
        terminalreporter.write_line(line)
