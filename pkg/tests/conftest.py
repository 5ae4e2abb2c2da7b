import re

_CRITERION = re.compile(r"test_criterion_(\d+)_")
_outcomes = {}


def pytest_runtest_logreport(report):
    """Remember the outcome of every ``test_criterion_<n>_*`` test."""
    m = _CRITERION.search(report.nodeid)
    if m is None or not (report.when == "call" or report.failed or report.skipped):
        return
    n = int(m.group(1))
    if _outcomes.get(n, ("",))[0] == "failed":
        return
    detail = "; ".join(str(v) for k, v in report.user_properties if k == "detail")
    _outcomes[n] = (report.outcome, detail)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        outcome, detail = _outcomes[n]
        label = {"passed": "PASS", "failed": "FAIL"}.get(outcome, outcome.upper())
        terminalreporter.write_line(f"criterion {n:2d}: {label}  {detail}".rstrip())
