import pytest

_LINES = {}


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion.

    Usage: ``criterion(number, detail)`` before the assertions; the line
    is marked FAIL unless the test body completes.
    """
    state = {}

    def record(number, detail=""):
        state["number"], state["detail"] = number, detail

    def update(detail):
        state["detail"] = detail

    record.update = update
    yield record
    if "number" in state:
        rep = getattr(request.node, "rep_call", None)
        ok = rep is not None and rep.passed
        _LINES[state["number"]] = (ok, state["detail"])


@pytest.hookimpl(hookwrapper=True, tryfirst=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    def key(label):
        head, _, tail = str(label).partition("-")
        return int(head), tail

    for label in sorted(_LINES, key=key):
        ok, detail = _LINES[label]
        terminalreporter.write_line(
            f"criterion {str(label):>6}: {'PASS' if ok else 'FAIL'}  {detail}")
