import numpy as np
import pytest

from biwcm.core import WeightedBipartiteGraph, Mode


def random_counts(rng, n, m, density=0.3, high=100):
    """Integer weights in 0..high with roughly ``density`` nonzero cells."""
    w = rng.integers(1, high + 1, size=(n, m)) * (rng.random((n, m)) < density)
    # keep at least one link so the graph is valid
    if not w.any():
        w[0, 0] = 1
    return w.astype(float)


def as_graph(w, mode=Mode.CONTINUOUS):
    return WeightedBipartiteGraph.from_matrix(w, mode=mode)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# ---------------------------------------------------------------------------
# one pass/fail line per acceptance criterion at the end of the run

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    marker = getattr(report, "_criterion", None)
    if marker is None:
        return
    num, title = marker
    entry = _criteria.setdefault(num, {"title": title, "ok": True, "ran": False})
    if report.when == "call" or report.failed:
        entry["ran"] = True
        if report.failed:
            entry["ok"] = False


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        report._criterion = (mark.args[0], mark.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        e = _criteria[num]
        state = "PASS" if e["ok"] and e["ran"] else ("FAIL" if e["ran"] else "NOT RUN")
        terminalreporter.write_line(f"criterion {num:2d}  {state:7s} {e['title']}")
