import numpy as np
import pytest


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance: full acceptance-gate criteria (slow)")


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
