import pytest

from cavityband import _backend

BACKENDS = sorted(_backend.AVAILABLE)


@pytest.fixture(params=BACKENDS)
def backend(request):
    """Run the test once per available kernel backend."""
    previous = _backend.select(request.param)
    yield request.param
    _backend.select(previous)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion checked by this test")
    config._criteria = {}


def pytest_runtest_logreport(report):
    item_marker = getattr(report, "criterion", None)
    if item_marker is None:
        return
    number, text = item_marker
    crit = _CONFIG._criteria.setdefault(number, {"text": text, "ok": True, "seen": False})
    if report.when == "call" or report.failed:
        crit["seen"] = True
        crit["ok"] = crit["ok"] and report.passed if report.when == "call" else False


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = tuple(marker.args)


_CONFIG = None


@pytest.hookimpl(tryfirst=True)
def pytest_sessionstart(session):
    global _CONFIG
    _CONFIG = session.config


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    crits = getattr(config, "_criteria", {})
    if not crits:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(crits):
        c = crits[number]
        verdict = "PASS" if c["ok"] and c["seen"] else "FAIL"
        detail = "; ".join(c.get("detail", []))
        terminalreporter.write_line(f"criterion {number:>2}: {verdict}  {c['text']}" + (f"  [{detail}]" if detail else ""))


@pytest.fixture
def measured(request):
    """``measured("label", value)`` attaches a measured value to this test's criterion line."""
    marker = request.node.get_closest_marker("criterion")

    def note(label, value):
        if marker is None:
            return
        number, text = marker.args
        crit = request.config._criteria.setdefault(number, {"text": text, "ok": True, "seen": False})
        shown = f"{value:.6g}" if isinstance(value, float) else str(value)
        crit.setdefault("detail", []).append(f"{label}={shown}")

    return note
