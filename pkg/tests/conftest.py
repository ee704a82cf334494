import pytest

_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion with a pass/fail summary line")


@pytest.fixture
def detail(request):
    """Dict of measurements shown next to the criterion's pass/fail line."""
    d = {}
    request.node.criterion_detail = d
    return d


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None and (rep.when == "call" or (rep.when == "setup" and not rep.passed)):
        _CRITERIA.append((mark.args[0], mark.args[1], rep.passed, getattr(item, "criterion_detail", {})))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, info in sorted(_CRITERIA, key=lambda c: c[0]):
        extra = ", ".join(f"{k}={v}" for k, v in info.items())
        terminalreporter.write_line(f"criterion {number} {title}: {'PASS' if passed else 'FAIL'}  {extra}")
