"""Acceptance bookkeeping: one PASS/FAIL line per criterion in the summary."""

_criteria: dict[str, tuple[int, str]] = {}
_results: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            number, title = marker.args
            _criteria[item.nodeid] = (number, title)
            _results.setdefault(number, {"title": title, "ok": True, "tests": 0, "seconds": 0.0})


def pytest_runtest_logreport(report):
    if report.nodeid not in _criteria:
        return
    entry = _results[_criteria[report.nodeid][0]]
    entry["seconds"] += report.duration
    if report.when == "call":
        entry["tests"] += 1
    if report.failed or (report.when == "call" and report.skipped):
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        entry = _results[number]
        ok = entry["ok"] and entry["tests"] > 0
        terminalreporter.write_line(
            f"criterion {number:2d}  {'PASS' if ok else 'FAIL'}  {entry['title']}  "
            f"({entry['tests']} tests, {entry['seconds']:.1f} s)")
