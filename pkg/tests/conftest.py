import numpy as np
import pytest

from depthres import BandwidthMap, DepthMap, GuidanceImage, LAMBDA_MIN


def random_instance(rng, h=4, w=4, holes=False):
    """Random depth, initialization, guidance and bandwidth on an h x w grid."""
    d = rng.uniform(0.1, 0.9, (h, w))
    d0 = np.clip(d + rng.normal(0.0, 0.05, (h, w)), 0.0, 1.0)
    mask = rng.uniform(size=(h, w)) > 0.2 if holes else None
    color = GuidanceImage(rng.uniform(0.0, 1.0, (h, w, 3)))
    bw = BandwidthMap(rng.uniform(LAMBDA_MIN + 0.01, 0.08, (h, w)))
    return d, DepthMap(d0, mask), color, bw


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion covered by the test")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            _CRITERIA.setdefault(mark.args[0], {"text": mark.args[1], "outcomes": []})


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    for number, entry in _CRITERIA.items():
        if f"criterion_{number}_" in report.nodeid:
            entry["outcomes"].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        outcomes = entry["outcomes"]
        if not outcomes:
            status = "NOT RUN"
        elif "failed" in outcomes:
            status = "FAIL"
        elif all(o == "skipped" for o in outcomes):
            status = "SKIP"
        else:
            status = "PASS"
        terminalreporter.write_line(f"criterion {number}: {status}  {entry['text']}")
