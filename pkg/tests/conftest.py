from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kinnet.records import ElectionRecord, Position  # noqa: E402

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def rec(last, first, middle=None, position=Position.COUNCILOR, party=None, province="SAMAR", year=2016, **kw):
    return ElectionRecord(last_name=last, first_name=first, middle_name=middle, position=Position(position),
                          province=province, year=year, party=party, **kw)


@pytest.fixture
def make_record():
    return rec


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
