import pytest

ACCEPTANCE_LINES: list[str] = []
PROPERTY_MODULES = ("test_domain", "test_surrogate", "test_mechanism", "test_accountant",
                    "test_weights", "test_protocol", "test_objectives", "test_experiments")
_property_outcomes: dict[str, list[str]] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    module = report.nodeid.split("::")[0].rsplit("/", 1)[-1].removesuffix(".py")
    if module in PROPERTY_MODULES:
        _property_outcomes.setdefault(module, []).append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES and not _property_outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
    if _property_outcomes:
        failed = {m: o.count("failed") for m, o in _property_outcomes.items() if "failed" in o}
        total = sum(len(o) for o in _property_outcomes.values())
        status = "PASS" if not failed else "FAIL"
        terminalreporter.write_line(
            f"module property suites: {status}  {total} tests in "
            f"{len(_property_outcomes)} modules" + (f", failures: {failed}" if failed else ""))
