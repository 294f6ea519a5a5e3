"""
Core data models for covlearn.
"""
import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from covlearn.core.config import ConfigError, InvalidDimsError


@dataclass(frozen=True)
class Dims:
    """
    Problem dimensions of one coherence interval.

    Attributes:
        N: Number of devices
        L: Pilot length
        M: Number of base-station antennas
        K: Number of active devices
    """

    N: int
    L: int
    M: int
    K: int

    def __post_init__(self) -> None:
        for name in ("N", "L", "M"):
            if int(getattr(self, name)) < 1:
                raise InvalidDimsError(f"{name} must be a positive integer")
        if self.K < 0:
            raise InvalidDimsError("K must be >= 0")
        if self.K > self.N:
            raise InvalidDimsError(f"K={self.K} exceeds N={self.N}")

    def to_dict(self) -> Dict[str, int]:
        return {"N": self.N, "L": self.L, "M": self.M, "K": self.K}


@dataclass(frozen=True)
class PilotMatrix:
    """Pilot matrix A (L x N); column n is the signature of device n."""

    entries: np.ndarray

    @property
    def L(self) -> int:
        return int(self.entries.shape[0])

    @property
    def N(self) -> int:
        return int(self.entries.shape[1])

    def column(self, n: int) -> np.ndarray:
        return self.entries[:, n]


@dataclass(frozen=True)
class ActivityPattern:
    """Binary activity vector alpha and its sorted support."""

    alpha: np.ndarray
    support: np.ndarray

    @classmethod
    def from_support(cls, support: np.ndarray, N: int) -> "ActivityPattern":
        support = np.sort(np.asarray(support, dtype=np.int64))
        alpha = np.zeros(N, dtype=np.int8)
        alpha[support] = 1
        return cls(alpha=alpha, support=support)

    @property
    def K(self) -> int:
        return int(self.support.size)


@dataclass(frozen=True)
class PowerProfile:
    """
    Per-device powers.

    Attributes:
        rho: Transmit powers
        beta: Large-scale fading coefficients
        gamma_true: Received powers alpha * rho * beta
    """

    rho: np.ndarray
    beta: np.ndarray
    gamma_true: np.ndarray


@dataclass(frozen=True)
class Scenario:
    """
    One synthesized coherence interval ``Y = A X + E``.

    Attributes:
        dims: Problem dimensions
        pilots: Pilot matrix A
        activity: Activity pattern
        powers: Power profile
        channels: Small-scale channels H (N x M)
        noise_var: Noise variance sigma^2
        effective_channels: X with row n equal to sqrt(gamma_n) h_n
        noise: Noise matrix E (L x M)
        received: Received matrix Y (L x M)
    """

    dims: Dims
    pilots: PilotMatrix
    activity: ActivityPattern
    powers: PowerProfile
    channels: np.ndarray
    noise_var: float
    effective_channels: np.ndarray
    noise: np.ndarray
    received: np.ndarray


@dataclass
class ScenarioSnapshot:
    """
    Seed-level description of a scenario, enough to regenerate it exactly.

    Matrix entries are never stored; see ``covlearn.core.scenario.scenario_from_snapshot``.
    """

    dims: Dims
    seed: int
    noise_var: float
    pilot_seed: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format": "covlearn.scenario/1",
            "dims": self.dims.to_dict(),
            "seed": self.seed,
            "noise_var": self.noise_var,
            "pilot_seed": self.pilot_seed,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScenarioSnapshot":
        if data.get("format") != "covlearn.scenario/1":
            raise ConfigError(f"Unsupported scenario snapshot format: {data.get('format')}")
        try:
            return cls(
                dims=Dims(**data["dims"]),
                seed=int(data["seed"]),
                noise_var=float(data["noise_var"]),
                pilot_seed=data.get("pilot_seed"),
            )
        except (KeyError, TypeError) as e:
            raise ConfigError(f"Invalid scenario snapshot: {str(e)}")

    def save(self, path: str) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def load(cls, path: str) -> "ScenarioSnapshot":
        with open(path, "r") as f:
            return cls.from_dict(json.load(f))


@dataclass
class SolverConfig:
    """
    Solver parameters.

    ``max_iters`` and ``gamma_init`` left as None select each solver's own
    default (50 iterations and a zero start for CL-SCA and CWO, 500 iterations
    and a uniform positive start for EM).

    Attributes:
        eta0: Initial step size, in (0, 1/epsilon)
        epsilon: Step-decay constant, in (0, 1)
        max_iters: Iteration cap I_max
        tol: Convergence threshold delta
        gamma_init: Initial power vector
        shuffle: Randomize the CWO sweep order
        seed: Seed for the CWO sweep order
    """

    eta0: float = 0.99
    epsilon: float = 0.05
    max_iters: Optional[int] = None
    tol: float = 1e-3
    gamma_init: Optional[np.ndarray] = None
    shuffle: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not 0.0 < self.eta0 < 1.0 / self.epsilon:
            raise ConfigError(f"eta0 must lie in (0, 1/epsilon), got {self.eta0}")
        if self.tol <= 0:
            raise ConfigError(f"tol must be > 0, got {self.tol}")
        if self.max_iters is not None and self.max_iters < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.gamma_init is not None:
            gamma = np.asarray(self.gamma_init, dtype=float)
            if gamma.ndim != 1 or np.any(gamma < 0) or not np.all(np.isfinite(gamma)):
                raise ConfigError("gamma_init must be a finite nonnegative vector")
            self.gamma_init = gamma

    def initial_gamma(self, N: int) -> np.ndarray:
        """Return a copy of gamma_init (zeros when unset), checked against N."""
        if self.gamma_init is None:
            return np.zeros(N)
        if self.gamma_init.size != N:
            raise ConfigError(
                f"gamma_init has length {self.gamma_init.size}, expected N={N}"
            )
        return self.gamma_init.copy()


@dataclass
class SolverState:
    """Iterate of the CL-SCA loop."""

    gamma_k: np.ndarray
    eta_k: float
    direction: np.ndarray
    objective_trace: List[float] = field(default_factory=list)
    iter: int = 0


@dataclass
class SolverResult:
    """
    Output of a solver.

    Attributes:
        gamma_hat: Estimated power vector
        iterations: Number of iterations (sweeps for CWO, greedy steps for CL-MP)
        converged: Whether the termination test fired before the iteration cap
        objective_trace: Objective value per iteration
        wall_time: Solver time in seconds, sample covariance excluded
        solver: Solver identifier
    """

    gamma_hat: np.ndarray
    iterations: int
    converged: bool
    objective_trace: List[float]
    wall_time: float
    solver: str = ""


@dataclass(frozen=True)
class DetectionRule:
    """Top-K rule or threshold rule for activity detection."""

    kind: str
    K: Optional[int] = None
    gamma_th: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind == "top_k":
            if self.K is None or self.K < 0:
                raise ConfigError("top-K rule requires K >= 0")
        elif self.kind == "threshold":
            if self.gamma_th is None or self.gamma_th < 0:
                raise ConfigError("threshold rule requires gamma_th >= 0")
        else:
            raise ConfigError(f"Unknown detection rule: {self.kind}")

    @classmethod
    def top_k(cls, K: int) -> "DetectionRule":
        return cls(kind="top_k", K=int(K))

    @classmethod
    def threshold(cls, gamma_th: float) -> "DetectionRule":
        return cls(kind="threshold", gamma_th=float(gamma_th))


@dataclass
class JadceOutput:
    """
    Result of one activity-detection and channel-estimation run.

    Attributes:
        alpha_hat: Detected activity vector
        support_hat: Sorted detected support
        gamma_pruned: Power estimates masked by alpha_hat
        x_hat: Posterior mean of the effective channel matrix (N x M)
        sigma_x: Posterior covariance (N x N), present only when requested
        result: The underlying solver result
    """

    alpha_hat: np.ndarray
    support_hat: np.ndarray
    gamma_pruned: np.ndarray
    x_hat: np.ndarray
    sigma_x: Optional[np.ndarray]
    result: SolverResult

    def to_dict(self) -> Dict[str, Any]:
        return {
            "solver": self.result.solver,
            "support": [int(n) for n in self.support_hat],
            "gamma_hat": [float(g) for g in self.result.gamma_hat],
            "gamma_pruned": [float(g) for g in self.gamma_pruned],
            "iterations": self.result.iterations,
            "converged": self.result.converged,
        }


# CSV header key -> ResultRow attribute
RESULT_COLUMNS = {
    "solver": "solver",
    "L": "L",
    "M": "M",
    "K": "K",
    "trials": "trials",
    "p_md": "p_md_mean",
    "p_md_se": "p_md_stderr",
    "nmse": "nmse_mean",
    "nmse_se": "nmse_stderr",
    "time_s": "mean_solver_time_s",
    "iters": "mean_iterations",
}

_INT_COLUMNS = ("L", "M", "K", "trials")


@dataclass
class ResultRow:
    """Aggregated metrics of one experiment cell."""

    solver: str
    L: int
    M: int
    K: int
    trials: int
    p_md_mean: float
    p_md_stderr: float
    nmse_mean: float
    nmse_stderr: float
    mean_solver_time_s: float
    mean_iterations: float

    def to_record(self) -> Dict[str, Any]:
        return {key: getattr(self, attr) for key, attr in RESULT_COLUMNS.items()}

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "ResultRow":
        values: Dict[str, Any] = {}
        for key, attr in RESULT_COLUMNS.items():
            raw = record[key]
            if key == "solver":
                values[attr] = str(raw)
            elif key in _INT_COLUMNS:
                values[attr] = int(raw)
            else:
                values[attr] = float(raw)
        return cls(**values)
