import pytest

from askstop.simulate import ArrivalProcess, LogitAskerConfig, simulate_log

REFERENCE_COEFS = (-4.408, 0.027, 0.028, 0.021)

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def reference_log():
    """20,000 questions from the visit-level logit asker at the reference coefficients."""
    asker = LogitAskerConfig(*REFERENCE_COEFS)
    return simulate_log(asker, ArrivalProcess("poisson", 0.25), 20_000, seed=7)


@pytest.fixture
def acceptance():
    """Record one pass/fail line per criterion, then assert it."""

    def record(number: int, title: str, passed: bool, detail: str):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
