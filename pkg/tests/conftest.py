import numpy as np
import pytest

from rulxai.data import simulate_degradation


@pytest.fixture(scope="session")
def small_fleet():
    return simulate_degradation(12, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = []


@pytest.fixture
def verdict(capsys):
    """Record one acceptance line; it is echoed live and in the terminal summary."""

    def record(name, ok, detail, status=None):
        status = status or ("PASS" if ok else "FAIL")
        line = f"{status:<7}{name}: {detail}"
        ACCEPTANCE.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
