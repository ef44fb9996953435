"""Per-criterion bookkeeping for the acceptance suite.

Tests tagged ``@pytest.mark.criterion("C3")`` are grouped; the terminal
summary prints one PASS / FAIL / SKIP line per group, plus any notes the
tests attached through the ``criterion_note`` fixture.
"""

from collections import defaultdict

import pytest

_OUTCOMES: dict[str, list[str]] = defaultdict(list)
_NOTES: dict[str, list[str]] = defaultdict(list)
_TITLES: dict[str, str] = {}


def _criterion(item):
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return None
    cid = mark.args[0]
    if len(mark.args) > 1:
        _TITLES.setdefault(cid, mark.args[1])
    return cid


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    cid = _criterion(item)
    if cid is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        result = report.outcome
        if report.skipped:
            reason = report.longrepr[2] if isinstance(report.longrepr, tuple) else str(report.longrepr)
            _NOTES[cid].append(f"{item.name}: skipped ({reason.removeprefix('Skipped: ')})")
        _OUTCOMES[cid].append(result)


@pytest.fixture
def criterion_note(request):
    cid = _criterion(request.node)

    def note(text: str) -> None:
        _NOTES[cid or "?"].append(f"{request.node.name}: {text}")

    return note


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(_OUTCOMES):
        results = _OUTCOMES[cid]
        if "failed" in results:
            verdict = "FAIL"
        elif all(r == "skipped" for r in results):
            verdict = "SKIP"
        elif "skipped" in results:
            verdict = "PARTIAL"
        else:
            verdict = "PASS"
        tr.write_line(f"{cid} {verdict:<8} {_TITLES.get(cid, '')} [{len(results)} test(s)]")
        for note in _NOTES.get(cid, []):
            tr.write_line(f"      {note}")
