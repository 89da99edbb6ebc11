import numpy as np
import pytest

from riskcontract import binomial_model, tabulated_model


@pytest.fixture(scope="session")
def case_model():
    """Ransomware family with ten computers and damping 0.8 on [0, 1]."""
    return binomial_model(10, 0.8)


@pytest.fixture
def constant_model():
    return tabulated_model([0.0], [0.0, 5.0, 10.0], [[0.2, 0.3, 0.5]], 0.0, 1.0)


@pytest.fixture
def affine_model():
    """Losses shift down linearly as the action grows."""
    return tabulated_model([0.0, 1.0], [0.0, 5.0, 10.0], [[0.2, 0.3, 0.5], [0.7, 0.2, 0.1]])


@pytest.fixture
def reversed_model():
    """Investing more makes losses larger: dominance fails."""
    return tabulated_model([0.0, 1.0], [0.0, 5.0, 10.0], [[0.7, 0.2, 0.1], [0.2, 0.3, 0.5]])



def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
