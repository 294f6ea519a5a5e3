"""
EM iteration of multiple-measurement-vector sparse Bayesian learning (M-SBL).
"""
import time
from typing import Optional

import numpy as np

from covlearn.core.covlik import assemble_covariance, negative_llf, quad_forms
from covlearn.core.models import SolverConfig, SolverResult
from covlearn.solvers.base import Solver, check_problem

DEFAULT_MAX_ITERS = 500


def default_em_gamma(S: np.ndarray, N: int) -> np.ndarray:
    """Uniform positive start ``tr(S) / (L N)``; zero is absorbing for EM."""
    L = S.shape[0]
    return np.full(N, float(np.real(np.trace(S))) / (L * N))


def em_update(gamma: np.ndarray, A: np.ndarray, B: np.ndarray, S: np.ndarray) -> np.ndarray:
    """
    One EM step expressed through the sample covariance.

    The posterior second moment of row i, ``|mu_i|^2 / M + (Sigma_x)_ii``,
    reduces to ``gamma_i + gamma_i^2 (b_i^H S b_i - a_i^H b_i)``.
    """
    ab, bsb = quad_forms(A, B, S)
    return np.maximum(gamma + gamma**2 * (bsb - ab), 0.0)


def solve_msbl_em(
    S: np.ndarray,
    A: np.ndarray,
    noise_var: float,
    config: Optional[SolverConfig] = None,
) -> SolverResult:
    """
    Minimize the covariance-fitting objective with the M-SBL EM iteration.

    Args:
        S: Sample covariance matrix (L x L)
        A: Pilot matrix (L x N)
        noise_var: Noise variance
        config: Iteration cap (default 500), tolerance and starting point
            (default ``tr(S) / (L N)`` in every coordinate)

    Returns:
        SolverResult; converged when ``||gamma_{k+1} - gamma_k|| < tol``
    """
    check_problem(S, A, noise_var)
    config = config or SolverConfig()
    max_iters = config.max_iters or DEFAULT_MAX_ITERS
    N = A.shape[1]
    if config.gamma_init is None:
        gamma = default_em_gamma(S, N)
    else:
        gamma = config.initial_gamma(N)

    trace = []
    converged = False
    iterations = 0
    start = time.perf_counter()

    while iterations < max_iters:
        iterations += 1
        cov = assemble_covariance(A, gamma, noise_var)
        B = cov.solve(A)
        trace.append(negative_llf(S, cov))

        new_gamma = em_update(gamma, A, B, S)
        step = np.linalg.norm(new_gamma - gamma)
        gamma = new_gamma
        if step < config.tol:
            converged = True
            break

    wall_time = time.perf_counter() - start
    return SolverResult(
        gamma_hat=gamma,
        iterations=iterations,
        converged=converged,
        objective_trace=trace,
        wall_time=wall_time,
        solver="msbl-em",
    )


class MsblEmSolver(Solver):
    """Solver plugin for the M-SBL EM iteration."""

    name = "msbl-em"

    def solve(
        self,
        S: np.ndarray,
        A: np.ndarray,
        noise_var: float,
        config: Optional[SolverConfig] = None,
        K: Optional[int] = None,
    ) -> SolverResult:
        return solve_msbl_em(S, A, noise_var, config)
