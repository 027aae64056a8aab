import numpy as np
import pytest

from crossturn import build_alpha_set, compute_returns, evaluate_alpha, generate_synthetic

# Signals that are independent from one day to the next (volume and
# intraday range are drawn afresh each day by the generator).
DAILY_SIGNALS = (
    "volume",
    "sqrt(volume)",
    "(high-low)/close",
    "(high-open)/close",
    "(open-low)/close",
    "open/delay(close,1) - 1",
)


@pytest.fixture(scope="session")
def panel():
    return generate_synthetic(3, 400, 30)


@pytest.fixture(scope="session")
def returns(panel):
    return compute_returns(panel)


@pytest.fixture(scope="session")
def alpha_panels(panel):
    return [evaluate_alpha(e, panel) for e in DAILY_SIGNALS[:4]]


@pytest.fixture(scope="session")
def alpha_set(alpha_panels, returns):
    return build_alpha_set(alpha_panels, returns)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance report --------------------------------------------------------

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    number, title = marker
    entry = _CRITERIA.setdefault(number, {"title": title, "ok": True, "notes": []})
    if report.when == "call" or report.failed:
        entry["ok"] = entry["ok"] and report.passed
        for name, content in report.user_properties:
            if name == "note":
                entry["notes"].append(content)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = tuple(marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        status = "PASS" if entry["ok"] else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {entry['title']}")
        for note in entry["notes"]:
            terminalreporter.write_line(f"    {note}")
