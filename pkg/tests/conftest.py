"""Shared fixtures and the acceptance summary printed at the end of a run."""

# criterion label -> (passed, detail); filled in by tests/test_acceptance.py
ACCEPTANCE = {}


def record(label, passed, detail):
    ACCEPTANCE[label] = (bool(passed), detail)
    return bool(passed)


def _order(label):
    head = label.split()[0]
    return (0, int(head)) if head.isdigit() else (1, label)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE, key=_order):
        passed, detail = ACCEPTANCE[label]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
