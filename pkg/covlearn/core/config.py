"""
Configuration management for covlearn.
"""
import os
from typing import Any, Dict, List, Optional, Sequence

import yaml
from pydantic import BaseModel, ValidationError, root_validator, validator

SOLVER_NAMES = ("cl-sca", "cwo", "cl-mp", "msbl-em")


class ConfigError(Exception):
    """Exception raised for configuration errors."""
    pass


class InvalidDimsError(ConfigError):
    """Exception raised when problem dimensions are inconsistent."""
    pass


def load_config_file(path: str) -> Dict[str, Any]:
    """
    Load an experiment configuration from a JSON or YAML file.

    JSON is parsed through the YAML loader, which accepts it as a subset.

    Args:
        path: Path to the configuration file

    Returns:
        Configuration dictionary

    Raises:
        ConfigError: If the file cannot be loaded or parsed
    """
    if not os.path.exists(path):
        raise ConfigError(f"Configuration file not found: {path}")

    try:
        with open(path, "r") as f:
            config = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"Error parsing configuration in {path}: {str(e)}")
    except OSError as e:
        raise ConfigError(f"Error loading configuration from {path}: {str(e)}")

    if not isinstance(config, dict):
        raise ConfigError(f"Invalid configuration format in {path}")

    return config


def apply_overrides(config: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """
    Apply ``key=value`` overrides to a configuration dictionary.

    Values are parsed with the YAML loader so ``trials=10`` yields an int and
    ``K_values=[20,30]`` a list.

    Args:
        config: Configuration dictionary (not modified)
        overrides: Override expressions

    Returns:
        New configuration dictionary with the overrides applied

    Raises:
        ConfigError: If an override is malformed
    """
    result = dict(config)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"Invalid override (expected key=value): {item}")
        key, raw = item.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"Invalid override (empty key): {item}")
        try:
            result[key] = yaml.safe_load(raw)
        except yaml.YAMLError as e:
            raise ConfigError(f"Invalid override value for {key}: {str(e)}")
    return result


class DetectionSpec(BaseModel):
    """Detection rule template; top-K takes K from the experiment cell."""

    rule: str = "top_k"
    gamma_th: Optional[float] = None

    class Config:
        extra = "forbid"

    @validator("rule")
    def _known_rule(cls, value: str) -> str:
        if value not in ("top_k", "threshold"):
            raise ValueError("must be 'top_k' or 'threshold'")
        return value

    @root_validator(skip_on_failure=True)
    def _threshold_needs_value(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        if values["rule"] == "threshold":
            gamma_th = values.get("gamma_th")
            if gamma_th is None or gamma_th < 0:
                raise ValueError("threshold rule requires gamma_th >= 0")
        return values


class ExperimentSpec(BaseModel):
    """
    Monte-Carlo sweep description.

    Every (L, M, K, solver) combination is one cell of the experiment.
    """

    N: int = 300
    L_values: List[int]
    M_values: List[int]
    K_values: List[int]
    solvers: List[str] = list(SOLVER_NAMES)
    trials: int = 1000
    noise_var: float = 1.0
    master_seed: int = 0
    detection: DetectionSpec = DetectionSpec()
    fixed_pilots: bool = False

    class Config:
        extra = "forbid"

    @validator("N", "trials")
    def _positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be >= 1")
        return value

    @validator("L_values", "M_values", "K_values")
    def _nonempty_positive(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("must be a nonempty list")
        if any(v < 1 for v in value):
            raise ValueError("entries must be >= 1")
        return value

    @validator("solvers")
    def _known_solvers(cls, value: List[str]) -> List[str]:
        if not value:
            raise ValueError("must be a nonempty list")
        unknown = [name for name in value if name not in SOLVER_NAMES]
        if unknown:
            raise ValueError(
                f"unknown solver(s) {unknown}; expected one of {list(SOLVER_NAMES)}"
            )
        return value

    @validator("noise_var")
    def _positive_noise(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("must be > 0")
        return value

    @validator("master_seed")
    def _seed_range(cls, value: int) -> int:
        if not 0 <= value < 2**64:
            raise ValueError("must be a 64-bit unsigned integer")
        return value

    @root_validator(skip_on_failure=True)
    def _k_within_n(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        n = values["N"]
        too_large = [k for k in values["K_values"] if k > n]
        if too_large:
            raise ValueError(f"K_values {too_large} exceed N={n}")
        return values


def validate_experiment_config(config: Dict[str, Any]) -> ExperimentSpec:
    """
    Validate an experiment configuration.

    Args:
        config: Experiment configuration dictionary

    Returns:
        The validated ExperimentSpec

    Raises:
        ConfigError: With one ``field: message`` line per problem
    """
    try:
        return ExperimentSpec.parse_obj(config)
    except ValidationError as e:
        lines = []
        for error in e.errors():
            location = ".".join(str(part) for part in error["loc"])
            lines.append(f"{location}: {error['msg']}")
        raise ConfigError("Invalid experiment configuration:\n  " + "\n  ".join(lines))


def load_experiment_spec(path: str, overrides: Sequence[str] = ()) -> ExperimentSpec:
    """
    Load, override and validate an experiment configuration file.

    Args:
        path: Path to the configuration file
        overrides: ``key=value`` overrides applied before validation

    Returns:
        The validated ExperimentSpec
    """
    config = load_config_file(path)
    return validate_experiment_config(apply_overrides(config, overrides))
