def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow exact-evolution checks")


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
