"""
Pytest configuration for covlearn tests.
"""
import os
import sys

import numpy as np
import pytest

# Add the project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from covlearn.cli.commands import setup_logging
from covlearn.core.models import Dims
from covlearn.core.scenario import generate_pilots, sample_covariance

# Configure pytest
pytest_plugins = [
    "pytest_asyncio",
]


@pytest.fixture(autouse=True, scope="session")
def quiet_logging():
    """Route structlog through stdlib logging at WARNING for the whole session."""
    setup_logging(False)


@pytest.fixture
def small_problem():
    """A random L=5, N=8 problem: pilots, sample covariance and a power vector."""
    rng = np.random.default_rng(1234)
    A = generate_pilots(Dims(N=8, L=5, M=1, K=0), rng).entries
    Y = np.sqrt(0.5) * (rng.standard_normal((5, 12)) + 1j * rng.standard_normal((5, 12)))
    S = sample_covariance(Y)
    gamma = np.array([0.0, 0.7, 0.0, 1.3, 0.2, 0.0, 2.1, 0.5])
    return A, S, gamma
