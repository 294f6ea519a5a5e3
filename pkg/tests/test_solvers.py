"""
Tests for the covariance-learning solvers.
"""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from covlearn.core.config import ConfigError
from covlearn.core.covlik import (
    assemble_covariance,
    downdate_direction,
    llf_gradient,
    negative_llf,
)
from covlearn.core.models import Dims, SolverConfig
from covlearn.core.scenario import generate_scenario, sample_covariance
from covlearn.solvers.base import SOLVER_REGISTRY, Solver, create_solver
from covlearn.solvers.cwo import cwo_coordinate_update, solve_cwo
from covlearn.solvers.em import default_em_gamma, solve_msbl_em
from covlearn.solvers.mp import solve_cl_mp
from covlearn.solvers.sca import (
    next_step_size,
    sca_coordinate_minimizer,
    sca_minimizers,
    sca_surrogate,
    solve_cl_sca,
)


@pytest.fixture
def recovery_problem():
    """Many antennas, two active devices: the support is easy to recover."""
    scenario = generate_scenario(Dims(N=12, L=8, M=10000, K=2), 1.0, np.random.default_rng(21))
    return scenario, sample_covariance(scenario.received)


def test_step_size_rule():
    """Test one step of the diminishing step-size rule."""
    assert next_step_size(0.99, 0.05) == pytest.approx(0.940995, abs=1e-12)


def test_step_size_decays_like_inverse_k():
    """Test the step size decreases strictly and eta_k * k approaches 1/epsilon."""
    eta = 0.99
    steps = 100000
    for _ in range(steps):
        next_eta = next_step_size(eta, 0.05)
        assert 0.0 < next_eta < eta
        eta = next_eta
    assert eta * steps == pytest.approx(1.0 / 0.05, rel=0.1)


def test_solver_config_validation():
    """Test invalid solver parameters are rejected."""
    with pytest.raises(ConfigError, match="epsilon"):
        SolverConfig(epsilon=1.5)
    with pytest.raises(ConfigError, match="eta0"):
        SolverConfig(eta0=25.0, epsilon=0.05)
    with pytest.raises(ConfigError, match="tol"):
        SolverConfig(tol=0.0)
    with pytest.raises(ConfigError, match="gamma_init"):
        SolverConfig(gamma_init=np.array([1.0, -1.0]))
    with pytest.raises(ConfigError, match="expected N"):
        SolverConfig(gamma_init=np.ones(3)).initial_gamma(4)


def test_sca_minimizer_fixed_point(small_problem):
    """Test the surrogate minimizer returns the current value when S is the model covariance."""
    A, _, gamma = small_problem
    cov = assemble_covariance(A, gamma, 1.0)
    B = cov.solve(A)
    S = np.array(cov.sigma)
    for i in range(8):
        assert sca_coordinate_minimizer(gamma[i], B[:, i], A[:, i], S) == pytest.approx(
            gamma[i], abs=1e-9
        )


def test_sca_surrogate_tangent_to_objective(small_problem):
    """Test the surrogate slope at the current iterate equals the objective gradient."""
    A, S, gamma = small_problem
    cov = assemble_covariance(A, gamma, 1.0)
    B = cov.solve(A)
    grad = llf_gradient(S, A, cov, B)
    h = 1e-6
    for i in np.flatnonzero(gamma):
        g_i, b_i, a_i = gamma[i], B[:, i], A[:, i]
        slope = (
            sca_surrogate(g_i + h, g_i, b_i, a_i, S) - sca_surrogate(g_i - h, g_i, b_i, a_i, S)
        ) / (2 * h)
        assert slope == pytest.approx(grad[i], rel=1e-5, abs=1e-7)


def test_sca_minimizer_clamps(small_problem):
    """Test the minimizer is clamped at zero for S = 0 and gamma_i = 0."""
    A, _, _ = small_problem
    cov = assemble_covariance(A, np.zeros(8), 1.0)
    B = cov.solve(A)
    assert sca_coordinate_minimizer(0.0, B[:, 0], A[:, 0], np.zeros((5, 5))) == 0.0


def test_sca_vectorized_matches_scalar(small_problem):
    """Test the vectorized minimizers against the per-coordinate version."""
    A, S, gamma = small_problem
    B = assemble_covariance(A, gamma, 1.0).solve(A)
    expected = [sca_coordinate_minimizer(gamma[i], B[:, i], A[:, i], S) for i in range(8)]
    assert_allclose(sca_minimizers(gamma, A, B, S), expected, rtol=1e-12, atol=1e-14)


def test_cl_sca_fixed_point_start(small_problem):
    """Test starting at the true powers with S = model covariance stops after one iteration."""
    A, _, gamma = small_problem
    S = np.array(assemble_covariance(A, gamma, 1.0).sigma)
    result = solve_cl_sca(S, A, 1.0, SolverConfig(gamma_init=gamma))
    assert result.iterations == 1
    assert result.converged
    assert_allclose(result.gamma_hat, gamma, atol=1e-9)


def test_cl_sca_result_shape(small_problem):
    """Test the result invariants of CL-SCA."""
    A, S, _ = small_problem
    result = solve_cl_sca(S, A, 1.0)
    assert result.solver == "cl-sca"
    assert np.all(result.gamma_hat >= 0)
    assert 1 <= result.iterations <= 50
    assert len(result.objective_trace) == result.iterations
    assert result.wall_time >= 0


def test_cl_sca_large_step_stays_nonnegative(small_problem):
    """Test nonnegativity with an initial step size above one."""
    A, S, _ = small_problem
    result = solve_cl_sca(S, A, 1.0, SolverConfig(eta0=1.5, epsilon=0.05))
    assert np.all(result.gamma_hat >= 0)


def test_cl_sca_recovers_support(recovery_problem):
    """Test CL-SCA finds the two active devices with many antennas."""
    scenario, S = recovery_problem
    result = solve_cl_sca(S, scenario.pilots.entries, 1.0)
    top2 = np.sort(np.argsort(-result.gamma_hat, kind="stable")[:2])
    assert list(top2) == list(scenario.activity.support)


def test_cwo_update_is_coordinate_minimizer(small_problem):
    """Test the exact update against a dense grid search of the true objective."""
    A, S, gamma = small_problem
    cov = assemble_covariance(A, gamma, 1.0)
    B = cov.solve(A)
    grid = np.linspace(0.0, 20.0, 20001)
    for i in (1, 2, 6):
        c = downdate_direction(B[:, i], A[:, i], gamma[i])
        closed = cwo_coordinate_update(gamma[i], c, A[:, i], S)

        def objective(x):
            trial = gamma.copy()
            trial[i] = x
            return negative_llf(S, assemble_covariance(A, trial, 1.0))

        best = min(grid, key=objective)
        assert objective(closed) <= objective(best) + 1e-12


def test_cwo_stationary_point(small_problem):
    """Test the update leaves a coordinate unchanged when S is the model covariance."""
    A, _, gamma = small_problem
    cov = assemble_covariance(A, gamma, 1.0)
    B = cov.solve(A)
    S = np.array(cov.sigma)
    for i in range(8):
        c = downdate_direction(B[:, i], A[:, i], gamma[i])
        assert cwo_coordinate_update(gamma[i], c, A[:, i], S) == pytest.approx(gamma[i], abs=1e-9)


def test_cwo_boundary_clamp(small_problem):
    """Test the update is zero for S = 0 at gamma_i = 0."""
    A, _, _ = small_problem
    c = assemble_covariance(A, np.zeros(8), 1.0).solve(A)[:, 0]
    assert cwo_coordinate_update(0.0, c, A[:, 0], np.zeros((5, 5))) == 0.0


def test_cwo_sweeps_descend(small_problem):
    """Test that the objective never increases across sweeps."""
    A, S, _ = small_problem
    result = solve_cwo(S, A, 1.0, SolverConfig(max_iters=20, tol=1e-12))
    assert np.all(np.diff(result.objective_trace) <= 1e-9)
    assert np.all(result.gamma_hat >= 0)


def test_cwo_shuffle_is_seeded(small_problem):
    """Test randomized sweep order is reproducible for a fixed seed."""
    A, S, _ = small_problem
    first = solve_cwo(S, A, 1.0, SolverConfig(shuffle=True, seed=5))
    second = solve_cwo(S, A, 1.0, SolverConfig(shuffle=True, seed=5))
    assert_allclose(first.gamma_hat, second.gamma_hat)


def test_cwo_recovers_support(recovery_problem):
    """Test CWO finds the two active devices with many antennas."""
    scenario, S = recovery_problem
    result = solve_cwo(S, scenario.pilots.entries, 1.0)
    top2 = np.sort(np.argsort(-result.gamma_hat, kind="stable")[:2])
    assert list(top2) == list(scenario.activity.support)


def test_cl_mp_selects_k(small_problem):
    """Test CL-MP runs exactly K steps and returns at most K nonzeros."""
    A, S, _ = small_problem
    result = solve_cl_mp(S, A, 1.0, 3)
    assert result.iterations == 3
    assert result.converged
    assert np.count_nonzero(result.gamma_hat) <= 3
    assert np.all(np.diff(result.objective_trace) <= 1e-12)


def test_cl_mp_k_range(small_problem):
    """Test CL-MP rejects K outside [1, N]."""
    A, S, _ = small_problem
    with pytest.raises(ConfigError, match="1 <= K"):
        solve_cl_mp(S, A, 1.0, 0)
    with pytest.raises(ConfigError, match="1 <= K"):
        solve_cl_mp(S, A, 1.0, 9)
    with pytest.raises(ConfigError, match="requires the number"):
        create_solver("cl-mp").solve(S, A, 1.0)


def test_cl_mp_recovers_support(recovery_problem):
    """Test CL-MP picks the two active devices with many antennas."""
    scenario, S = recovery_problem
    result = solve_cl_mp(S, scenario.pilots.entries, 1.0, 2)
    assert list(np.flatnonzero(result.gamma_hat)) == list(scenario.activity.support)


def test_em_default_start(small_problem):
    """Test the EM default start is the uniform value tr(S) / (L N)."""
    _, S, _ = small_problem
    assert_allclose(default_em_gamma(S, 8), np.real(np.trace(S)) / 40)


def test_em_monotone(small_problem):
    """Test the EM objective trace never increases."""
    A, S, _ = small_problem
    result = solve_msbl_em(S, A, 1.0, SolverConfig(max_iters=200, tol=1e-300))
    assert result.iterations == 200
    assert not result.converged
    assert np.all(np.diff(result.objective_trace) <= 1e-9)


def test_em_kkt_at_limit(small_problem):
    """Test complementarity of gamma and the gradient after many EM steps."""
    A, S, _ = small_problem
    result = solve_msbl_em(S, A, 1.0, SolverConfig(max_iters=1000, tol=1e-12))
    cov = assemble_covariance(A, result.gamma_hat, 1.0)
    B = cov.solve(A)
    ab = np.real(np.einsum("li,li->i", A.conj(), B))
    bsb = np.real(np.einsum("li,li->i", B.conj(), S @ B))
    grad = ab - bsb
    assert np.min(grad) > -2e-2
    assert np.max(np.abs(result.gamma_hat * grad)) < 2e-2


def test_registry_and_factory():
    """Test solver creation by identifier."""
    assert set(SOLVER_REGISTRY) == {"cl-sca", "cwo", "cl-mp", "msbl-em"}
    for name in SOLVER_REGISTRY:
        solver = create_solver(name)
        assert isinstance(solver, Solver)
        assert solver.name == name
    with pytest.raises(ConfigError, match="Unknown solver"):
        create_solver("lasso")


def test_dimension_mismatch(small_problem):
    """Test that S and A with inconsistent shapes are rejected."""
    A, _, _ = small_problem
    with pytest.raises(ConfigError, match="expected"):
        solve_cl_sca(np.eye(4), A, 1.0)


@pytest.mark.slow
def test_cl_sca_iteration_cost_grows_linearly_with_devices():
    """Test doubling N at most multiplies the CL-SCA time per iteration by 2.5."""
    config = SolverConfig(max_iters=20, tol=1e-12)

    def per_iteration(N, seed):
        scenario = generate_scenario(Dims(N=N, L=30, M=40, K=20), 1.0, np.random.default_rng(seed))
        S = sample_covariance(scenario.received)
        result = solve_cl_sca(S, scenario.pilots.entries, 1.0, config)
        return result.wall_time / result.iterations

    per_iteration(300, 0)
    small = np.median([per_iteration(300, seed) for seed in range(20)])
    large = np.median([per_iteration(600, seed) for seed in range(20)])
    assert large <= 2.5 * small
