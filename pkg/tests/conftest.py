def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdicts at the end of the run, in criterion order."""
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
