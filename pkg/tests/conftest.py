import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Reprint acceptance-criterion verdict lines after the test summary.

    pytest captures file descriptors during the run, so the one-line
    pass/fail verdicts written by the acceptance tests would otherwise be
    invisible unless a test fails or -s is given.
    """
    mod = next(
        (m for name, m in sys.modules.items() if name.endswith("test_acceptance")),
        None,
    )
    lines = getattr(mod, "VERDICTS", None) if mod else None
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
