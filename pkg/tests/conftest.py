from __future__ import annotations

import pytest

_CRITERIA: dict[int, str] = {}


@pytest.fixture
def record_criterion():
    """Record the outcome of one acceptance criterion and print it."""

    def record(number: int, title: str, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}  [{detail}]"
        _CRITERIA[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
