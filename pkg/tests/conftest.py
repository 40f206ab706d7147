import os
import sys

import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, print_blob=True)
settings.load_profile("default")


@pytest.fixture(scope="session")
def transmon():
    from qubitnoise.transduction import TransmonModel

    return TransmonModel(ej_sum=25e9, ec=0.25e9, asymmetry=0.3)


@pytest.fixture(scope="session")
def sensitivity(transmon):
    from qubitnoise.transduction import flux_sensitivity

    return flux_sensitivity(transmon, 0.25)


# --------------------------------------------------------------------------
# acceptance summary

_PROPERTY_FAILURES = []
_PROPERTY_RUN = [0]
_START = [0.0]


def pytest_sessionstart(session):
    import time

    _START[0] = time.time()


def pytest_runtest_logreport(report):
    if "test_acceptance" in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        _PROPERTY_RUN[0] += report.when == "call"
        if report.failed:
            _PROPERTY_FAILURES.append(report.nodeid)


def pytest_terminal_summary(terminalreporter):
    import time

    from acceptance_log import RESULTS

    if not RESULTS:
        return
    elapsed = time.time() - _START[0]
    if _PROPERTY_RUN[0]:
        ok = not _PROPERTY_FAILURES and elapsed < 15 * 60
        detail = (f"{_PROPERTY_RUN[0]} property/unit tests in this run, {len(_PROPERTY_FAILURES)} failed "
                  f"{_PROPERTY_FAILURES}; suite time {elapsed:.0f} s (limit 900 s)")
        RESULTS.append((8, f"ACCEPTANCE 8 {'PASS' if ok else 'FAIL'}: property suite green | {detail}"))
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(RESULTS, key=lambda r: r[0]):
        terminalreporter.write_line(line)
