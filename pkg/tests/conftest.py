import numpy as np
import pytest

from lqccd import generate_instance


@pytest.fixture
def small_instance():
    problem, truth = generate_instance(50, 100, 5, 30.0, True, seed=11)
    return problem.with_params(0.009, 0.5), truth


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import VERDICTS

    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
