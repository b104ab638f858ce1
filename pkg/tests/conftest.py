import numpy as np
import pytest

from ballqcqp.instance import example_e1, generate


@pytest.fixture
def e1():
    return example_e1()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def inst_733():
    return generate(7, 3, 3)


ACCEPTANCE_LINES = {}


def record(criterion: int, passed: bool, summary: str) -> None:
    """Store one verdict line per acceptance criterion for the terminal summary."""
    line = f"criterion {criterion:2d}: {'PASS' if passed else 'FAIL'}  {summary}"
    ACCEPTANCE_LINES[criterion] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
