import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from evtraj.dataset import synthetic_corpus  # noqa: E402


@pytest.fixture(scope="session")
def raw_corpus():
    """The default synthetic corpus: 250 sources plus mirrors, split 470/20/10."""
    return synthetic_corpus(250, seed=0)


@pytest.fixture(scope="session")
def small_corpus():
    return synthetic_corpus(20, seed=1)


# ---------------------------------------------------------------------------
# acceptance reporting: one PASS/FAIL line per criterion at the end of the run
# ---------------------------------------------------------------------------

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n, title = marker.args
    detail = dict(item.user_properties).get("detail", "")
    if report.when == "call" or (report.when == "setup" and report.failed):
        _ACCEPTANCE.setdefault(n, (title, []))[1].append((report.passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        title, results = _ACCEPTANCE[n]
        status = "PASS" if all(ok for ok, _ in results) else "FAIL"
        details = "; ".join(d for _, d in results if d)
        line = f"criterion {n:2d} [{status}] {title}"
        terminalreporter.write_line(line + (f": {details}" if details else ""))
