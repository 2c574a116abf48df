"""Shared pytest hooks.

The acceptance tests produce one human-readable verdict line per criterion.
Under pytest's default fd-level capture those lines would vanish into the
per-test buffers, so they are queued here and re-emitted after capture is
torn down, in the terminal summary of every run.
"""

_acceptance_lines: list[str] = []


def record_acceptance_line(line: str) -> None:
    _acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in _acceptance_lines:
        terminalreporter.write_line(line)
