import pytest

_RESULTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def record():
    """Store one PASS/FAIL line per acceptance criterion."""

    def _record(k: int, ok: bool, detail: str) -> bool:
        _RESULTS[k] = (bool(ok), detail)
        return bool(ok)

    return _record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_RESULTS):
        ok, detail = _RESULTS[k]
        terminalreporter.write_line(f"CRITERION {k} {'PASS' if ok else 'FAIL'}: {detail}")
