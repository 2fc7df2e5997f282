import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)


# ---- acceptance reporting ---------------------------------------------------
# Tests marked ``acceptance(number, title)`` get one PASS/FAIL line each in
# the terminal summary, with whatever they recorded through ``measured``.

_ACCEPTANCE: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.fixture
def measured(request):
    marker = request.node.get_closest_marker("acceptance")
    entry = _ACCEPTANCE.setdefault(marker.args[0], {"title": marker.args[1], "notes": []})
    return entry["notes"].append


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call" and not report.failed:
        return
    entry = _ACCEPTANCE.setdefault(marker.args[0], {"title": marker.args[1], "notes": []})
    entry["passed"] = entry.get("passed", True) and report.passed


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        e = _ACCEPTANCE[number]
        status = "PASS" if e.get("passed") else "FAIL"
        detail = "; ".join(e["notes"])
        terminalreporter.write_line(f"[{status}] {number:2d}. {e['title']}" + (f" ({detail})" if detail else ""))
