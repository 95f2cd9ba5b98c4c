import pytest

_CRITERIA = {}


@pytest.fixture
def criterion(request):
    """Record a numbered acceptance criterion's outcome for the summary."""

    def mark(number, title):
        _CRITERIA[request.node.nodeid] = (number, title)

    return mark


_OUTCOMES = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        _OUTCOMES[item.nodeid] = rep.outcome


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    grouped = {}
    for nodeid, (number, title) in _CRITERIA.items():
        entry = grouped.setdefault(number, [title, 0, 0])
        entry[1] += 1
        entry[2] += _OUTCOMES.get(nodeid) == "passed"
    terminalreporter.section("acceptance criteria")
    for number, (title, total, passed) in sorted(grouped.items()):
        status = "PASS" if passed == total else "FAIL"
        detail = f" ({passed}/{total} checks)" if total > 1 else ""
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {title}{detail}")
