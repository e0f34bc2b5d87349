import json
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

_acceptance: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): exit criterion checked by this test")


def pytest_runtest_logreport(report):
    if report.when != "call" and report.outcome != "failed":
        return
    marker = report.__dict__.get("acceptance")
    if marker is None:
        return
    number, title = marker
    entry = _acceptance.setdefault(number, {"title": title, "ok": True, "n": 0})
    entry["n"] += report.when == "call"
    entry["ok"] &= report.outcome == "passed"


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        report.acceptance = tuple(marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        e = _acceptance[number]
        status = "PASS" if e["ok"] and e["n"] else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number}: {e['title']}")


@pytest.fixture(scope="session")
def forge_manifest():
    return json.loads((FIXTURES / "forge_manifest.json").read_text())
