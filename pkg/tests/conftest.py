import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance-check verdicts after capture is released.

    The acceptance tests record one PASS/FAIL line each; printing them here
    keeps the one-line-per-check summary visible in a plain ``pytest -v`` run
    instead of being swallowed by output capture.
    """
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None) if module else None
    if lines:
        terminalreporter.section("acceptance summary")
        for line in lines:
            terminalreporter.write_line(line)
