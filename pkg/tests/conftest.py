import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if not name.startswith("test_criterion_"):
        return
    detail = dict(report.user_properties).get("summary", "")
    _ACCEPTANCE[name] = ("PASS" if report.passed else "FAIL", report.duration, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda s: int(s.split("_")[2])):
        status, dur, detail = _ACCEPTANCE[name]
        terminalreporter.write_line(f"{status}  {name}  ({dur:.1f} s)  {detail}")


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    from selbias import _backend

    if request.param == "numba" and not _backend.HAS_NUMBA:
        pytest.skip("numba unavailable")
    prev = _backend.set_backend(request.param)
    yield request.param
    _backend.set_backend(prev)
