"""
Model covariance, covariance-fitting objective and rank-one utilities.

The inverse of the model covariance is never formed: every quadratic form goes
through the cached Cholesky factor.
"""
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky

DEGENERACY_TOL = 1e-12
QUAD_FLOOR = 1e-15


class CovarianceError(ValueError):
    """Raised when a covariance is not positive definite or a downdate degenerates."""
    pass


class ModelCovariance:
    """
    ``Sigma = A diag(gamma) A^H + sigma^2 I`` with its lower Cholesky factor.

    Instances are immutable after construction.
    """

    def __init__(self, sigma: np.ndarray):
        """
        Factor a Hermitian positive definite matrix.

        Args:
            sigma: Hermitian L x L matrix

        Raises:
            CovarianceError: If the Cholesky factorization fails
        """
        self.sigma = np.array(sigma, copy=True)
        try:
            self.chol = cholesky(sigma, lower=True, check_finite=True)
        except (LinAlgError, ValueError) as e:
            raise CovarianceError(f"Model covariance is not positive definite: {str(e)}")
        self.sigma.setflags(write=False)
        self.chol.setflags(write=False)

    @property
    def L(self) -> int:
        return int(self.sigma.shape[0])

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Return ``Sigma^{-1} rhs`` by two triangular solves."""
        return cho_solve((self.chol, True), rhs)

    def logdet(self) -> float:
        return float(2.0 * np.sum(np.log(np.real(np.diag(self.chol)))))


def assemble_covariance(
    A: np.ndarray, gamma: np.ndarray, noise_var: float
) -> ModelCovariance:
    """
    Assemble the model covariance for a power vector.

    Args:
        A: Pilot matrix (L x N)
        gamma: Nonnegative power vector (N,)
        noise_var: Noise variance, > 0

    Returns:
        ModelCovariance with cached Cholesky factor

    Raises:
        CovarianceError: If noise_var <= 0, gamma has negative entries or the
            result is not positive definite
    """
    gamma = np.asarray(gamma, dtype=float)
    if noise_var <= 0:
        raise CovarianceError(f"noise_var must be > 0, got {noise_var}")
    if gamma.shape != (A.shape[1],):
        raise CovarianceError(
            f"gamma has shape {gamma.shape}, expected ({A.shape[1]},)"
        )
    if np.any(gamma < 0) or not np.all(np.isfinite(gamma)):
        raise CovarianceError("gamma must be finite and nonnegative")

    sigma = (A * gamma) @ A.conj().T
    sigma = 0.5 * (sigma + sigma.conj().T)
    sigma[np.diag_indices_from(sigma)] += noise_var
    return ModelCovariance(sigma)


def quad_forms(
    A: np.ndarray, B: np.ndarray, S: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Columnwise quadratic forms ``a_i^H b_i`` and ``b_i^H S b_i``.

    Real parts are taken and floored at QUAD_FLOOR. Each entry depends only on
    its own column, so the result does not depend on evaluation order.
    """
    ab = np.real(np.einsum("li,li->i", A.conj(), B))
    bsb = np.real(np.einsum("li,li->i", B.conj(), S @ B))
    return np.maximum(ab, QUAD_FLOOR), np.maximum(bsb, 0.0)


def negative_llf(S: np.ndarray, cov: ModelCovariance) -> float:
    """
    Scaled negative log-likelihood ``tr(Sigma^{-1} S) + log|Sigma|``.

    Args:
        S: Sample covariance matrix
        cov: Model covariance

    Returns:
        Objective value
    """
    trace = float(np.real(np.trace(cov.solve(S))))
    return trace + cov.logdet()


def llf_gradient(
    S: np.ndarray, A: np.ndarray, cov: ModelCovariance, B: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    Gradient of the objective with respect to gamma.

    Entry i is ``a_i^H b_i - b_i^H S b_i`` with ``b_i = Sigma^{-1} a_i``.

    Args:
        S: Sample covariance matrix
        A: Pilot matrix
        cov: Model covariance at the evaluation point
        B: Precomputed ``Sigma^{-1} A`` (optional)

    Returns:
        Real vector of length N
    """
    if B is None:
        B = cov.solve(A)
    ab = np.real(np.einsum("li,li->i", A.conj(), B))
    bsb = np.real(np.einsum("li,li->i", B.conj(), S @ B))
    return ab - bsb


def downdate_direction(b_i: np.ndarray, a_i: np.ndarray, gamma_i: float) -> np.ndarray:
    """
    Sherman-Morrison downdate ``c_i = (Sigma - gamma_i a_i a_i^H)^{-1} a_i``.

    Args:
        b_i: ``Sigma^{-1} a_i``
        a_i: Pilot column
        gamma_i: Power of coordinate i, >= 0

    Returns:
        ``b_i / (1 - gamma_i a_i^H b_i)``

    Raises:
        CovarianceError: If the denominator is not above DEGENERACY_TOL
    """
    if gamma_i < 0:
        raise CovarianceError(f"gamma_i must be >= 0, got {gamma_i}")
    if gamma_i == 0:
        return b_i
    denom = 1.0 - gamma_i * float(np.real(np.vdot(a_i, b_i)))
    if denom <= DEGENERACY_TOL:
        raise CovarianceError(
            f"Degenerate rank-one downdate (denominator {denom:.3e})"
        )
    return b_i / denom
