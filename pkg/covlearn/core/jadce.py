"""
Joint activity detection and channel estimation.

Chains a solver, a detection rule, power pruning and the empirical-Bayes
posterior mean of the effective channels, and provides the evaluation metrics.
"""
import struct
from typing import Iterable, Optional, Tuple, Union

import numpy as np

from covlearn.core.config import ConfigError
from covlearn.core.covlik import assemble_covariance
from covlearn.core.models import DetectionRule, JadceOutput, Scenario, SolverConfig
from covlearn.core.scenario import sample_covariance
from covlearn.solvers.base import Solver, create_solver

CHANNEL_DUMP_MAGIC = b"CLXHAT01"
_CHANNEL_DUMP_HEADER = struct.Struct("<8sII")


class MetricError(ValueError):
    """Raised when a metric is undefined for its input."""
    pass


def detect(gamma_hat: np.ndarray, rule: DetectionRule) -> np.ndarray:
    """
    Activity decisions from power estimates.

    Args:
        gamma_hat: Estimated powers
        rule: Top-K rule (K largest entries, lowest index wins ties) or
            threshold rule (``gamma_hat_n >= gamma_th``)

    Returns:
        Binary int8 vector of length N

    Raises:
        ConfigError: If the top-K rule asks for more than N devices
    """
    gamma_hat = np.asarray(gamma_hat, dtype=float)
    N = gamma_hat.size
    alpha = np.zeros(N, dtype=np.int8)
    if rule.kind == "threshold":
        alpha[gamma_hat >= rule.gamma_th] = 1
        return alpha

    K = int(rule.K)  # type: ignore[arg-type]
    if K > N:
        raise ConfigError(f"top-K rule with K={K} exceeds N={N}")
    # stable sort keeps the lower index first among equal powers
    order = np.argsort(-gamma_hat, kind="stable")
    alpha[order[:K]] = 1
    return alpha


def estimate_channels(
    gamma_pruned: np.ndarray,
    A: np.ndarray,
    Y: np.ndarray,
    noise_var: float,
    with_posterior_cov: bool = False,
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """
    Posterior mean (and optionally covariance) of the effective channels.

    Args:
        gamma_pruned: Nonnegative pruned powers
        A: Pilot matrix (L x N)
        Y: Received matrix (L x M)
        noise_var: Noise variance
        with_posterior_cov: Also return the dense N x N posterior covariance

    Returns:
        (x_hat, sigma_x) where sigma_x is None unless requested
    """
    gamma = np.asarray(gamma_pruned, dtype=float)
    cov = assemble_covariance(A, gamma, noise_var)
    x_hat = gamma[:, None] * (A.conj().T @ cov.solve(Y))

    sigma_x = None
    if with_posterior_cov:
        gram = A.conj().T @ cov.solve(A)
        sigma_x = np.diag(gamma).astype(complex) - gamma[:, None] * gram * gamma[None, :]
        sigma_x = 0.5 * (sigma_x + sigma_x.conj().T)
    return x_hat, sigma_x


def run_jadce(
    Y: np.ndarray,
    A: np.ndarray,
    noise_var: float,
    rule: DetectionRule,
    solver: Union[str, Solver] = "cl-sca",
    config: Optional[SolverConfig] = None,
    S: Optional[np.ndarray] = None,
    K: Optional[int] = None,
    with_posterior_cov: bool = False,
) -> JadceOutput:
    """
    Solve, detect, prune and estimate channels.

    Args:
        Y: Received matrix (L x M)
        A: Pilot matrix (L x N)
        noise_var: Noise variance
        rule: Detection rule
        solver: Solver identifier or instance
        config: Solver configuration
        S: Precomputed sample covariance (computed from Y when omitted)
        K: Active-device count for greedy solvers; defaults to the top-K rule's K
        with_posterior_cov: Also compute the posterior covariance

    Returns:
        JadceOutput
    """
    if Y.shape[0] != A.shape[0]:
        raise ConfigError(f"Y has {Y.shape[0]} rows but A has {A.shape[0]}")
    if S is None:
        S = sample_covariance(Y)
    if K is None and rule.kind == "top_k":
        K = rule.K
    if isinstance(solver, str):
        solver = create_solver(solver)

    result = solver.solve(S, A, noise_var, config, K=K)
    alpha_hat = detect(result.gamma_hat, rule)
    gamma_pruned = result.gamma_hat * alpha_hat
    x_hat, sigma_x = estimate_channels(
        gamma_pruned, A, Y, noise_var, with_posterior_cov=with_posterior_cov
    )
    return JadceOutput(
        alpha_hat=alpha_hat,
        support_hat=np.flatnonzero(alpha_hat),
        gamma_pruned=gamma_pruned,
        x_hat=x_hat,
        sigma_x=sigma_x,
        result=result,
    )


def run_jadce_on_scenario(
    scenario: Scenario,
    solver: Union[str, Solver] = "cl-sca",
    rule: Optional[DetectionRule] = None,
    config: Optional[SolverConfig] = None,
    S: Optional[np.ndarray] = None,
    with_posterior_cov: bool = False,
) -> JadceOutput:
    """
    ``run_jadce`` on a generated scenario.

    The rule defaults to top-K with the true K, and greedy solvers always run
    for the true number of active devices.
    """
    if rule is None:
        rule = DetectionRule.top_k(scenario.dims.K)
    return run_jadce(
        scenario.received,
        scenario.pilots.entries,
        scenario.noise_var,
        rule,
        solver=solver,
        config=config,
        S=S,
        K=scenario.dims.K,
        with_posterior_cov=with_posterior_cov,
    )


def prob_missed_detection(true_support: Iterable[int], est_support: Iterable[int]) -> float:
    """
    Fraction of truly active devices that were not detected.

    Raises:
        MetricError: If the true support is empty
    """
    true_set = {int(n) for n in true_support}
    if not true_set:
        raise MetricError("missed-detection probability is undefined for an empty support")
    missed = true_set - {int(n) for n in est_support}
    return len(missed) / len(true_set)


def false_alarm_count(true_support: Iterable[int], est_support: Iterable[int]) -> int:
    """Number of detected devices that are not truly active."""
    return len({int(n) for n in est_support} - {int(n) for n in true_support})


def nmse(x_hat: np.ndarray, x_true: np.ndarray) -> float:
    """
    Normalized squared error ``||X_hat - X||_F^2 / ||X||_F^2``.

    Raises:
        MetricError: If x_true is all zeros
    """
    denom = float(np.sum(np.abs(x_true) ** 2))
    if denom == 0.0:
        raise MetricError("NMSE is undefined for an all-zero channel matrix")
    return float(np.sum(np.abs(x_hat - x_true) ** 2)) / denom


def dump_channel_matrix(x_hat: np.ndarray, path: str) -> None:
    """
    Write X_hat as a binary dump.

    Layout: 8-byte magic, uint32 N, uint32 M (little-endian), then the entries
    row-major as little-endian float64 (re, im) pairs.
    """
    x_hat = np.asarray(x_hat)
    N, M = x_hat.shape
    with open(path, "wb") as f:
        f.write(_CHANNEL_DUMP_HEADER.pack(CHANNEL_DUMP_MAGIC, N, M))
        f.write(np.ascontiguousarray(x_hat, dtype="<c16").tobytes())


def load_channel_matrix(path: str) -> np.ndarray:
    """Read a dump written by ``dump_channel_matrix``."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < _CHANNEL_DUMP_HEADER.size:
        raise ValueError(f"Truncated channel dump: {path}")
    magic, N, M = _CHANNEL_DUMP_HEADER.unpack_from(data)
    if magic != CHANNEL_DUMP_MAGIC:
        raise ValueError(f"Not a channel dump (bad magic): {path}")
    body = data[_CHANNEL_DUMP_HEADER.size:]
    if len(body) != N * M * 16:
        raise ValueError(f"Channel dump size mismatch for {N}x{M}: {path}")
    return np.frombuffer(body, dtype="<c16").reshape(N, M).astype(complex)
