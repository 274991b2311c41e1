from __future__ import annotations

import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=1000, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(n, title)`` then assert inside the test."""
    state = {}

    def register(number: int, title: str):
        state["key"] = (number, title)
        ACCEPTANCE[number] = (title, False, "did not finish")

    def note(text: str):
        state["note"] = text

    register.note = note
    yield register
    if "key" in state:
        number, title = state["key"]
        rep = getattr(request.node, "rep_call", None)
        passed = bool(rep and rep.passed)
        ACCEPTANCE[number] = (title, passed, state.get("note", ""))


@pytest.hookimpl(wrapper=True, tryfirst=True)
def pytest_runtest_makereport(item, call):
    rep = yield
    if rep.when == "call":
        item.rep_call = rep
    return rep


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, note = ACCEPTANCE[number]
        line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {title}"
        terminalreporter.write_line(line + (f" ({note})" if note else ""))
