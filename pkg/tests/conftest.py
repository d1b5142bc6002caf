import pytest

from aistrex.synthetic import make_fleet

_criteria: dict[int, tuple[str, bool]] = {}


def pytest_runtest_logreport(report):
    marker = dict(report.user_properties).get("acceptance")
    if marker is None:
        return
    n, title = marker
    failed = report.failed
    prev = _criteria.get(n, (title, True))
    if report.when == "call" or failed:
        _criteria[n] = (title, prev[1] and not failed)


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("acceptance")
        if m is not None:
            item.user_properties.append(("acceptance", (m.args[0], m.args[1])))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        title, ok = _criteria[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {title}")


@pytest.fixture(scope="session")
def noisy_fleet():
    return make_fleet(noise=True)


@pytest.fixture(scope="session")
def clean_fleet():
    return make_fleet(noise=False)
