"""
Covariance-learning matching pursuit (CL-MP) solver.
"""
import time
from typing import Optional

import numpy as np

from covlearn.core.config import ConfigError
from covlearn.core.covlik import assemble_covariance, negative_llf
from covlearn.core.models import SolverConfig, SolverResult
from covlearn.solvers.base import Solver, check_problem
from covlearn.solvers.cwo import cwo_minimizers


def solve_cl_mp(
    S: np.ndarray,
    A: np.ndarray,
    noise_var: float,
    K: int,
) -> SolverResult:
    """
    Greedy support growth for exactly K steps.

    At every step each not-yet-selected coordinate is scored by the objective
    decrease of its exact single-coordinate minimizer (started from zero); the
    best one is selected (lowest index on ties), fixed at that minimizer, and
    the inverse covariance is updated by one Sherman-Morrison step. A selected
    coordinate is never revisited.

    Args:
        S: Sample covariance matrix (L x L)
        A: Pilot matrix (L x N)
        noise_var: Noise variance
        K: Number of greedy steps, 1 <= K <= N

    Returns:
        SolverResult with at most K nonzeros

    Raises:
        ConfigError: If K is out of range
    """
    check_problem(S, A, noise_var)
    L, N = A.shape
    if K is None or not 1 <= K <= N:
        raise ConfigError(f"CL-MP requires 1 <= K <= N={N}, got K={K}")

    start = time.perf_counter()
    gamma = np.zeros(N)
    selected = np.zeros(N, dtype=bool)
    sigma_inv = np.eye(L) / noise_var
    objective = negative_llf(S, assemble_covariance(A, gamma, noise_var))
    trace = []

    for _ in range(K):
        trace.append(objective)
        B = sigma_inv @ A
        minimizers, decreases = cwo_minimizers(B, A, S)
        decreases[selected] = -np.inf
        j = int(np.argmax(decreases))

        selected[j] = True
        x = minimizers[j]
        if x > 0.0:
            b_j = B[:, j]
            denom = 1.0 + x * float(np.real(np.vdot(A[:, j], b_j)))
            sigma_inv = sigma_inv - (x / denom) * np.outer(b_j, b_j.conj())
            gamma[j] = x
            objective -= decreases[j]

    wall_time = time.perf_counter() - start
    return SolverResult(
        gamma_hat=gamma,
        iterations=K,
        converged=True,
        objective_trace=trace,
        wall_time=wall_time,
        solver="cl-mp",
    )


class ClMpSolver(Solver):
    """Solver plugin for CL-MP; K is mandatory."""

    name = "cl-mp"

    def solve(
        self,
        S: np.ndarray,
        A: np.ndarray,
        noise_var: float,
        config: Optional[SolverConfig] = None,
        K: Optional[int] = None,
    ) -> SolverResult:
        if K is None:
            raise ConfigError("CL-MP requires the number of active devices K")
        return solve_cl_mp(S, A, noise_var, K)
