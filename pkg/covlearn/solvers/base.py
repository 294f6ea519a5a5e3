"""
Base interface for covariance-learning solvers.
"""
import importlib
from abc import ABC, abstractmethod
from typing import Optional

import numpy as np

from covlearn.core.config import SOLVER_NAMES, ConfigError
from covlearn.core.models import SolverConfig, SolverResult

# Solver identifier -> "module.Class"
SOLVER_REGISTRY = {
    "cl-sca": "covlearn.solvers.sca.ClScaSolver",
    "cwo": "covlearn.solvers.cwo.CwoSolver",
    "cl-mp": "covlearn.solvers.mp.ClMpSolver",
    "msbl-em": "covlearn.solvers.em.MsblEmSolver",
}


class Solver(ABC):
    """
    Abstract base class for all solvers of the covariance-fitting problem.

    A solver takes the sample covariance S, the pilot matrix A and the noise
    variance, and returns a nonnegative power estimate.
    """

    name: str = ""

    @abstractmethod
    def solve(
        self,
        S: np.ndarray,
        A: np.ndarray,
        noise_var: float,
        config: Optional[SolverConfig] = None,
        K: Optional[int] = None,
    ) -> SolverResult:
        """
        Estimate the power vector.

        Args:
            S: Sample covariance matrix (L x L)
            A: Pilot matrix (L x N)
            noise_var: Noise variance
            config: Solver configuration (defaults when omitted)
            K: Number of active devices, used by greedy solvers only

        Returns:
            The solver result
        """
        pass


def check_problem(S: np.ndarray, A: np.ndarray, noise_var: float) -> None:
    """
    Validate the shapes shared by every solver.

    Raises:
        ConfigError: On dimension mismatch or non-positive noise variance
    """
    if A.ndim != 2:
        raise ConfigError(f"A must be a matrix, got shape {A.shape}")
    L = A.shape[0]
    if S.shape != (L, L):
        raise ConfigError(f"S has shape {S.shape}, expected {(L, L)} to match A")
    if noise_var <= 0:
        raise ConfigError(f"noise_var must be > 0, got {noise_var}")


def create_solver(name: str) -> Solver:
    """
    Create a solver instance by importing its class.

    Args:
        name: Solver identifier (cl-sca, cwo, cl-mp, msbl-em)

    Returns:
        Solver instance

    Raises:
        ConfigError: If the identifier is unknown
    """
    if name not in SOLVER_REGISTRY:
        raise ConfigError(
            f"Unknown solver: {name}; expected one of {list(SOLVER_NAMES)}"
        )
    module_path, class_name = SOLVER_REGISTRY[name].rsplit(".", 1)
    module = importlib.import_module(module_path)
    return getattr(module, class_name)()
