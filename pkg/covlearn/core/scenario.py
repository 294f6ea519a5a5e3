"""
Scenario synthesis for the uplink multiple-measurement-vector model.

Randomness is always passed in explicitly as a ``numpy.random.Generator``.
Monte-Carlo trials derive their generators from one master seed through
``numpy.random.SeedSequence`` spawn keys, so each trial stream depends only on
its coordinates and never on execution order.
"""
from typing import Optional, Sequence

import numpy as np

from covlearn.core.config import ConfigError
from covlearn.core.models import (
    ActivityPattern,
    Dims,
    PilotMatrix,
    PowerProfile,
    Scenario,
    ScenarioSnapshot,
)

LSFC_DB_RANGE = (-15.0, 0.0)
_INV_SQRT2 = 1.0 / np.sqrt(2.0)


def trial_rng(master_seed: int, key: Sequence[int]) -> np.random.Generator:
    """
    Derive an independent generator for one trial.

    Args:
        master_seed: Experiment master seed
        key: Nonnegative integer coordinates of the trial, e.g. (L, M, K, trial)

    Returns:
        Generator seeded from ``SeedSequence(master_seed, spawn_key=key)``
    """
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(seq)


def _complex_normal(rng: np.random.Generator, shape: tuple, var: float = 1.0) -> np.ndarray:
    """Circular complex Gaussian samples with the given variance."""
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def generate_pilots(dims: Dims, rng: np.random.Generator) -> PilotMatrix:
    """
    Draw normalized Bernoulli pilots with unit power per symbol.

    Each entry is uniform over {+-1/sqrt(2) +- j/sqrt(2)}, so every column has
    squared norm L.
    """
    signs = 2 * rng.integers(0, 2, size=(2, dims.L, dims.N)) - 1
    entries = _INV_SQRT2 * (signs[0] + 1j * signs[1])
    return PilotMatrix(entries=entries)


def generate_scenario(
    dims: Dims,
    noise_var: float,
    rng: np.random.Generator,
    pilots: Optional[PilotMatrix] = None,
) -> Scenario:
    """
    Synthesize one coherence interval ``Y = A X + E``.

    Args:
        dims: Problem dimensions
        noise_var: Noise variance sigma^2
        rng: Random source
        pilots: Fixed pilot matrix; drawn from ``rng`` when omitted

    Returns:
        The generated Scenario

    Raises:
        ConfigError: If noise_var is not positive or the pilots do not match dims
    """
    if noise_var <= 0:
        raise ConfigError(f"noise_var must be > 0, got {noise_var}")

    if pilots is None:
        pilots = generate_pilots(dims, rng)
    elif pilots.entries.shape != (dims.L, dims.N):
        raise ConfigError(
            f"pilot matrix has shape {pilots.entries.shape}, expected {(dims.L, dims.N)}"
        )

    support = rng.choice(dims.N, size=dims.K, replace=False)
    activity = ActivityPattern.from_support(support, dims.N)

    lsfc_db = rng.uniform(LSFC_DB_RANGE[0], LSFC_DB_RANGE[1], size=dims.N)
    beta = 10.0 ** (lsfc_db / 10.0)
    rho = np.ones(dims.N)
    gamma_true = activity.alpha * rho * beta
    powers = PowerProfile(rho=rho, beta=beta, gamma_true=gamma_true)

    channels = _complex_normal(rng, (dims.N, dims.M))
    effective = np.sqrt(gamma_true)[:, None] * channels
    noise = _complex_normal(rng, (dims.L, dims.M), noise_var)
    received = pilots.entries @ effective + noise

    return Scenario(
        dims=dims,
        pilots=pilots,
        activity=activity,
        powers=powers,
        channels=channels,
        noise_var=float(noise_var),
        effective_channels=effective,
        noise=noise,
        received=received,
    )


def scenario_from_snapshot(snapshot: ScenarioSnapshot) -> Scenario:
    """Regenerate the exact scenario described by a snapshot."""
    pilots = None
    if snapshot.pilot_seed is not None:
        pilots = generate_pilots(snapshot.dims, np.random.default_rng(snapshot.pilot_seed))
    return generate_scenario(
        snapshot.dims,
        snapshot.noise_var,
        np.random.default_rng(snapshot.seed),
        pilots=pilots,
    )


def sample_covariance(Y: np.ndarray) -> np.ndarray:
    """
    Sample covariance matrix ``S = Y Y^H / M``, symmetrized exactly.

    Args:
        Y: Received matrix (L x M)

    Returns:
        Hermitian L x L matrix
    """
    Y = np.asarray(Y)
    if Y.ndim != 2 or Y.shape[1] < 1:
        raise ConfigError(f"Y must be an L x M matrix with M >= 1, got shape {Y.shape}")
    S = (Y @ Y.conj().T) / Y.shape[1]
    return 0.5 * (S + S.conj().T)
