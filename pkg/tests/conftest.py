import numpy as np
import pytest

from rulls import Dataset

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n, title): acceptance criterion number and title")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    crit = getattr(report, "acceptance", None)
    if crit is not None:
        _ACCEPTANCE[crit[0]] = (crit[1], report.outcome, getattr(report, "acceptance_detail", ""))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        report.acceptance = marker.args
        report.acceptance_detail = getattr(item, "acceptance_detail", "")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        title, outcome, detail = _ACCEPTANCE[n]
        status = "PASS" if outcome == "passed" else "FAIL"
        line = f"[{status}] {n:2d}. {title}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)


def blobs(rng, n, m, centers=3, spread=4.0):
    """Gaussian blobs with distinct, well separated centres."""
    c = rng.normal(scale=spread, size=(centers, m))
    labels = rng.integers(0, centers, size=n)
    return Dataset(c[labels] + rng.normal(size=(n, m)), labels)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
