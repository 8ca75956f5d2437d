"""Print the acceptance summary after the run."""


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS, format_line
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS):
        title, ok, detail = RESULTS[key]
        terminalreporter.write_line(format_line(key, title, ok, detail))
