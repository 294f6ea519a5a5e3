"""
Numerical verification oracles.

Each oracle draws small random instances (L=5, N=8, sigma^2=1 by default), compares a
closed-form quantity against an independent numerical evaluation, and reports
the worst error seen.
"""
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from covlearn.core.covlik import (
    assemble_covariance,
    downdate_direction,
    llf_gradient,
    negative_llf,
)
from covlearn.core.models import Dims, SolverConfig
from covlearn.core.scenario import generate_pilots, sample_covariance
from covlearn.solvers.cwo import cwo_coordinate_update, solve_cwo
from covlearn.solvers.em import solve_msbl_em
from covlearn.solvers.sca import sca_coordinate_minimizer, sca_minimizers, sca_surrogate

ORACLE_L = 5
ORACLE_N = 8
ORACLE_NOISE_VAR = 1.0
SEARCH_BOUNDS = (0.0, 1e3)
GRADIENT_FLOOR = 1e-2


@dataclass
class OracleReport:
    """Outcome of one oracle over all seeds."""

    name: str
    passed: bool
    max_error: float
    tolerance: float
    cases: int


@dataclass
class Instance:
    """A random covariance-fitting problem."""

    A: np.ndarray
    S: np.ndarray
    gamma: np.ndarray
    noise_var: float


def random_instance(
    seed: int,
    L: int = ORACLE_L,
    N: int = ORACLE_N,
    noise_var: float = ORACLE_NOISE_VAR,
    snapshots: Optional[int] = None,
) -> Instance:
    """
    Draw Bernoulli pilots, a sample covariance of random data and a random iterate.

    The iterate has roughly 40% zeros so clamped coordinates are exercised.
    """
    rng = np.random.default_rng(seed)
    A = generate_pilots(Dims(N=N, L=L, M=1, K=0), rng).entries
    M = snapshots or 2 * L
    gamma_gen = rng.exponential(1.0, N) * (rng.random(N) < 0.5)
    H = np.sqrt(0.5) * (rng.standard_normal((N, M)) + 1j * rng.standard_normal((N, M)))
    E = np.sqrt(noise_var / 2) * (
        rng.standard_normal((L, M)) + 1j * rng.standard_normal((L, M))
    )
    S = sample_covariance(A @ (np.sqrt(gamma_gen)[:, None] * H) + E)
    gamma = rng.exponential(0.5, N) * (rng.random(N) < 0.6)
    return Instance(A=A, S=S, gamma=gamma, noise_var=noise_var)


def _argmin_1d(fn: Callable[[float], float]) -> float:
    res = minimize_scalar(
        fn, bounds=SEARCH_BOUNDS, method="bounded", options={"xatol": 1e-12, "maxiter": 2000}
    )
    return float(res.x)


def _argmin_error(fn: Callable[[float], float], closed: float) -> float:
    """
    Distance between the closed-form and numerical argmin.

    Returns 0 when the closed form attains an objective no worse than the
    numerical point (the search stalled on a flat minimum).
    """
    numeric = _argmin_1d(fn)
    if fn(closed) <= fn(numeric) + 1e-13 * max(1.0, abs(fn(numeric))):
        return 0.0
    return abs(closed - numeric)


def check_sca_coordinate(seeds: Sequence[int], tol: float = 1e-6) -> OracleReport:
    """Closed-form surrogate minimizer against bounded 1-D minimization."""
    worst = 0.0
    cases = 0
    for seed in seeds:
        inst = random_instance(seed)
        B = assemble_covariance(inst.A, inst.gamma, inst.noise_var).solve(inst.A)
        for i in range(inst.A.shape[1]):
            a_i, b_i, g_i = inst.A[:, i], B[:, i], float(inst.gamma[i])
            closed = sca_coordinate_minimizer(g_i, b_i, a_i, inst.S)
            err = _argmin_error(lambda x: sca_surrogate(x, g_i, b_i, a_i, inst.S), closed)
            worst = max(worst, err)
            cases += 1
    return OracleReport("theorem1", worst <= tol, worst, tol, cases)


def _objective_at(inst: Instance, i: int, x: float) -> float:
    gamma = inst.gamma.copy()
    gamma[i] = x
    return negative_llf(inst.S, assemble_covariance(inst.A, gamma, inst.noise_var))


def check_gradient(seeds: Sequence[int], tol: float = 1e-5) -> OracleReport:
    """
    Analytic gradient against finite differences.

    Central differences with step ``1e-6 * max(gamma_i, 1)``; second-order
    forward differences where the central stencil would leave the feasible set.
    The error of entry i is relative to ``|grad_i|``; entries smaller than
    GRADIENT_FLOOR are compared against the floor instead.
    """
    worst = 0.0
    cases = 0
    for seed in seeds:
        inst = random_instance(seed)
        cov = assemble_covariance(inst.A, inst.gamma, inst.noise_var)
        grad = llf_gradient(inst.S, inst.A, cov)
        for i in range(inst.A.shape[1]):
            x = float(inst.gamma[i])
            h = 1e-6 * max(x, 1.0)
            if x >= h:
                fd = (_objective_at(inst, i, x + h) - _objective_at(inst, i, x - h)) / (2 * h)
            else:
                fd = (
                    -3 * _objective_at(inst, i, x)
                    + 4 * _objective_at(inst, i, x + h)
                    - _objective_at(inst, i, x + 2 * h)
                ) / (2 * h)
            worst = max(worst, abs(grad[i] - fd) / max(abs(grad[i]), GRADIENT_FLOOR))
            cases += 1
    return OracleReport("gradient", worst <= tol, worst, tol, cases)


def check_sherman_morrison(seeds: Sequence[int], tol: float = 1e-9) -> OracleReport:
    """Rank-one downdate against an explicit solve with the downdated matrix."""
    worst = 0.0
    cases = 0
    for seed in seeds:
        inst = random_instance(seed)
        cov = assemble_covariance(inst.A, inst.gamma, inst.noise_var)
        B = cov.solve(inst.A)
        for i in range(inst.A.shape[1]):
            a_i = inst.A[:, i]
            c_i = downdate_direction(B[:, i], a_i, float(inst.gamma[i]))
            reduced = cov.sigma - inst.gamma[i] * np.outer(a_i, a_i.conj())
            expected = np.linalg.solve(reduced, a_i)
            worst = max(worst, np.linalg.norm(c_i - expected) / np.linalg.norm(expected))
            cases += 1
    return OracleReport("sherman-morrison", worst <= tol, worst, tol, cases)


def check_sca_fixed_point(seeds: Sequence[int], tol: float = 1e-9) -> OracleReport:
    """With S equal to the model covariance, the CL-SCA direction vanishes."""
    worst = 0.0
    for seed in seeds:
        inst = random_instance(seed)
        cov = assemble_covariance(inst.A, inst.gamma, inst.noise_var)
        B = cov.solve(inst.A)
        direction = sca_minimizers(inst.gamma, inst.A, B, np.array(cov.sigma)) - inst.gamma
        worst = max(worst, float(np.linalg.norm(direction)))
    return OracleReport("sca-fixed-point", worst <= tol, worst, tol, len(seeds))


def check_em_monotonicity(
    seeds: Sequence[int], tol: float = 1e-9, iterations: int = 200
) -> OracleReport:
    """The EM iteration never increases the objective."""
    worst = 0.0
    config = SolverConfig(max_iters=iterations, tol=1e-300)
    for seed in seeds:
        inst = random_instance(seed)
        result = solve_msbl_em(inst.S, inst.A, inst.noise_var, config)
        increases = np.diff(result.objective_trace)
        if increases.size:
            worst = max(worst, float(np.max(increases)))
    return OracleReport("em-monotonicity", worst <= tol, max(worst, 0.0), tol, len(seeds))


def check_cwo_coordinate(seeds: Sequence[int], tol: float = 1e-6) -> OracleReport:
    """
    Exact coordinate update against 1-D minimization of the true objective,
    plus the descent property of full sweeps.
    """
    worst = 0.0
    cases = 0
    descent_ok = True
    for seed in seeds:
        inst = random_instance(seed)
        cov = assemble_covariance(inst.A, inst.gamma, inst.noise_var)
        B = cov.solve(inst.A)
        for i in range(inst.A.shape[1]):
            a_i = inst.A[:, i]
            c_i = downdate_direction(B[:, i], a_i, float(inst.gamma[i]))
            closed = cwo_coordinate_update(float(inst.gamma[i]), c_i, a_i, inst.S)
            err = _argmin_error(lambda x: _objective_at(inst, i, x), closed)
            worst = max(worst, err)
            cases += 1

        result = solve_cwo(
            inst.S,
            inst.A,
            inst.noise_var,
            SolverConfig(max_iters=10, tol=1e-300, gamma_init=inst.gamma),
        )
        if np.any(np.diff(result.objective_trace) > 1e-9):
            descent_ok = False
    return OracleReport("cwo-coordinate", worst <= tol and descent_ok, worst, tol, cases)


ORACLES: Dict[str, Callable[[Sequence[int]], OracleReport]] = {
    "theorem1": check_sca_coordinate,
    "gradient": check_gradient,
    "sherman-morrison": check_sherman_morrison,
    "sca-fixed-point": check_sca_fixed_point,
    "em-monotonicity": check_em_monotonicity,
    "cwo-coordinate": check_cwo_coordinate,
}

# alternative name -> ORACLES key
ORACLE_ALIASES = {"sca-coordinate": "theorem1"}


def run_oracles(
    names: Optional[Sequence[str]] = None, seeds: int = 50
) -> List[OracleReport]:
    """
    Run the selected oracles (all by default) over seeds ``0 .. seeds-1``.

    Names may be ORACLES keys or ORACLE_ALIASES entries; reports carry the
    ORACLES key.

    Raises:
        KeyError: If an oracle name is unknown
    """
    selected = [ORACLE_ALIASES.get(name, name) for name in names] if names else list(ORACLES)
    for name in selected:
        if name not in ORACLES:
            raise KeyError(f"Unknown oracle: {name}")
    seed_list = list(range(seeds))
    return [ORACLES[name](seed_list) for name in selected]
