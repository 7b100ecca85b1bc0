"""Shared pytest wiring: collects acceptance-criterion verdicts and prints
one PASS/FAIL line per criterion after the run summary."""

ACCEPTANCE = []


def record(name: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE.append((name, bool(passed), detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, passed, detail in ACCEPTANCE:
        line = f"ACCEPTANCE {name}: {'PASS' if passed else 'FAIL'}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
