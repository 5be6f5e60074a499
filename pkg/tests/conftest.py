from __future__ import annotations

import pytest

from linecomplex.gamma import SchedulePolicy, assemble
from linecomplex.tree import build_pruned_tree


@pytest.fixture(scope="session")
def gamma_small():
    return assemble(build_pruned_tree(4), SchedulePolicy.constant(3))


@pytest.fixture(scope="session")
def gamma8():
    return assemble(build_pruned_tree(8), SchedulePolicy.constant(3))


@pytest.fixture(scope="session")
def gamma8_s2():
    return assemble(build_pruned_tree(8), SchedulePolicy.constant(2))


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, msg = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {msg}")
