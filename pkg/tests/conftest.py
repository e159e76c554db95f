import pytest

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number n")


@pytest.fixture
def detail(request):
    """Free-text note shown next to the criterion's pass/fail line."""
    notes = []
    request.node._criterion_notes = notes
    yield notes.append


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and report.passed:
        return
    n = marker.args[0]
    prev_ok, prev_notes = _CRITERIA.get(n, (True, ""))
    notes = "; ".join(filter(None, [prev_notes, *getattr(item, "_criterion_notes", [])]))
    _CRITERIA[n] = (prev_ok and report.passed, notes)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, notes = _CRITERIA[n]
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}"
        terminalreporter.write_line(f"{line}  {notes}" if notes else line)
