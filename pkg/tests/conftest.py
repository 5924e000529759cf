import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

CRITERIA = {
    1: "consistency orders",
    2: "stability transfer on random quadratics",
    3: "bilinear / quad_saddle qualitative table",
    4: "bound calculators vs hand oracle",
    5: "escape statistics on antisaddle",
    6: "compact attractor",
    7: "degenerate saddle x2y4",
    8: "numerics substrate",
}

_outcomes: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion the test checks")


def pytest_runtest_logreport(report):
    n = getattr(report, "criterion", None)
    if n is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _outcomes.setdefault(n, []).append((report.nodeid.split("::")[-1], report.outcome))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        outcome.get_result().criterion = mark.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_outcomes):
        runs = _outcomes[n]
        bad = [name for name, o in runs if o != "passed"]
        verdict = "PASS" if not bad else "FAIL"
        tr.write_line(f"criterion {n} [{CRITERIA.get(n, '')}]: {verdict} "
                      f"({len(runs) - len(bad)}/{len(runs)} checks)")
        for name in bad:
            tr.write_line(f"    failed: {name}")
