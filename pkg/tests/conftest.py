import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

CRITERIA = {
    "AC1": "packet conservation over 100 seeds",
    "AC2": "half-duplex audit on a saturated 3-hop chain",
    "AC3": "byte-identical outputs; run vs debug differ only by events.log",
    "AC4": "single-link queueing oracle (rho 0.5 and 1.5)",
    "AC5": "round-robin fairness with 4 saturated UEs",
    "AC6": "channel spot checks against calculator values",
    "AC7": "min-hop routing equals BFS; delivered paths are simple and end at donors",
    "AC8": "slot SINR interference oracle and monotonicity",
    "AC9": "monotone congestion on a 25-node Manhattan grid",
    "AC10": "transfer running-sum accounting",
}

_results: dict[str, list[bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id): acceptance criterion covered by the test")


def pytest_runtest_logreport(report):
    crit = getattr(report, "criterion", None)
    if crit is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _results.setdefault(crit, []).append(report.outcome == "passed")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for crit, text in CRITERIA.items():
        outcomes = _results.get(crit)
        if outcomes is None:
            status = "NOT RUN"
        else:
            status = "PASS" if all(outcomes) else "FAIL"
        terminalreporter.write_line(f"{crit:<5} {status:<7} {text}")
