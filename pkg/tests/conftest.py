"""Collects acceptance-criterion outcomes and prints one line per criterion."""

from collections import OrderedDict

import pytest

_OUTCOMES: "OrderedDict[str, list[tuple[bool, str]]]" = OrderedDict()


class AcceptanceLog:
    def record(self, criterion: str, ok: bool, detail: str) -> bool:
        _OUTCOMES.setdefault(criterion, []).append((bool(ok), detail))
        print(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
        return ok


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, parts in _OUTCOMES.items():
        ok = all(p for p, _ in parts)
        detail = "; ".join(d for _, d in parts)
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
