"""Collects per-criterion verdicts recorded by the acceptance tests."""

from hypothesis import settings

settings.register_profile("repro", derandomize=True)
settings.load_profile("repro")

_VERDICTS: list[tuple[str, str, str]] = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    for key, value in report.user_properties:
        if key == "criterion":
            verdict = "PASS" if report.passed else "FAIL"
            detail = dict(report.user_properties).get("detail", "")
            _VERDICTS.append((value, verdict, detail))


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for crit, verdict, detail in sorted(_VERDICTS, key=lambda v: (int(v[0].split(".")[0]), v[0])):
        terminalreporter.write_line(f"CRITERION {crit}: {verdict} {detail}".rstrip())
