"""Configuration module for lie-entropy."""

import logging
import os
from dataclasses import dataclass, field, fields
from typing import Any, Dict, Literal, Optional

import yaml

try:
    import pkg_resources
except ImportError:  # pragma: no cover - setuptools without pkg_resources
    pkg_resources = None

logger = logging.getLogger(__name__)


@dataclass
class ToleranceConfig:
    """Numerical tolerances used by checks throughout the package."""

    group_axioms: float = 1e-12
    exp_log: float = 1e-10
    left_invariance: float = 1e-9
    trajectory: float = 1e-10
    automorphism: float = 1e-12
    fd_step: float = 1e-6  # central-difference step for Jacobians
    fd_match: float = 1e-6
    eigen_residual: float = 1e-9
    unit_modulus: float = 1e-9  # eta: |alpha| within this of 1 is center
    ambiguity_band: float = 1e-6  # eta < ||alpha|-1| <= band is ambiguous
    subspace_invariance: float = 1e-9
    bracket: float = 1e-9
    trace_ad: float = 1e-9
    singular_det: float = 1e-12
    semiconjugacy: float = 1e-9


@dataclass
class BudgetConfig:
    """Hard caps guarding the combinatorial parts of the estimators."""

    max_evaluations: int = 10_000_000  # (word, point) trajectory checks per r_inv call
    exact_universe_cap: int = 20_000  # words left after dominance filtering
    exact_node_cap: int = 2_000_000  # branch-and-bound nodes


@dataclass
class EntropyConfig:
    """Defaults for entropy estimation and verdicts."""

    log_base: Literal["2", "e"] = "2"
    growth_horizon: int = 30
    min_fit_points: int = 4
    upper_tolerance: float = 0.2
    lower_tolerance: float = 0.15
    saturation_fraction: float = 0.5
    confidence: float = 0.95


@dataclass
class MeasureConfig:
    """Volume estimation settings for the quotient lower bound."""

    resolution_factor: float = 0.25  # box size = epsilon * factor
    mc_samples: int = 100_000
    seed: int = 0


@dataclass
class RunnerConfig:
    """Experiment orchestration settings."""

    max_workers: int = 4
    output_dir: str = "results"
    include_timings: bool = False


@dataclass
class Configuration:
    """Main configuration for lie-entropy."""

    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    budget: BudgetConfig = field(default_factory=BudgetConfig)
    entropy: EntropyConfig = field(default_factory=EntropyConfig)
    measure: MeasureConfig = field(default_factory=MeasureConfig)
    runner: RunnerConfig = field(default_factory=RunnerConfig)


_SECTIONS = tuple(f.name for f in fields(Configuration))


def package_data_path(name: str) -> str:
    """Resolve a data file shipped inside the package.

    Args:
        name: Path relative to the package directory

    Returns:
        Absolute path of the resource (it may not exist)
    """
    if pkg_resources is not None:
        try:
            path = pkg_resources.resource_filename("lie_entropy", name)
            if os.path.exists(path):
                return path
        except (pkg_resources.DistributionNotFound, FileNotFoundError):
            pass
    # Fall back to local path for development
    current_dir = os.path.dirname(os.path.abspath(__file__))
    return os.path.join(current_dir, name)


def get_default_config() -> Dict[str, Any]:
    """Load the default configuration from the package's default_config.yaml file.

    Returns:
        Dictionary containing the default configuration values
    """
    default_config_path = package_data_path("default_config.yaml")
    try:
        with open(default_config_path, "r") as f:
            config = yaml.safe_load(f)
            return config if config else {}
    except FileNotFoundError:
        return {}


def _apply_section(target: Any, values: Optional[Dict[str, Any]]) -> None:
    """Copy known keys from a mapping onto a config dataclass."""
    if not isinstance(values, dict):
        return
    for key, value in values.items():
        if hasattr(target, key):
            setattr(target, key, value)
        else:
            logger.debug(f"Ignoring unknown configuration key {type(target).__name__}.{key}")


def _apply_mapping(config: Configuration, data: Dict[str, Any]) -> None:
    for section in _SECTIONS:
        if section in data:
            _apply_section(getattr(config, section), data[section])


def load_config(config_path: Optional[str] = None) -> Configuration:
    """Load configuration from a YAML file, with fallback to default values.

    Args:
        config_path: Optional path to a custom configuration file

    Returns:
        Configuration object with applied settings
    """
    config = Configuration()
    _apply_mapping(config, get_default_config())

    # If no custom config path provided, look in standard locations
    if not config_path:
        config_path = os.environ.get("LIE_ENTROPY_CONFIG")
        if not config_path or not os.path.exists(config_path):
            config_path = os.path.join(os.path.expanduser("~"), ".lie-entropy", "config.yaml")

    if config_path and os.path.exists(config_path):
        try:
            with open(config_path, "r") as f:
                config_data = yaml.safe_load(f) or {}
            _apply_mapping(config, config_data)
        except Exception as e:
            logger.error(f"Error loading configuration from {config_path}: {e}")

    env = os.environ
    if "LIE_ENTROPY_MAX_WORKERS" in env:
        try:
            config.runner.max_workers = int(env["LIE_ENTROPY_MAX_WORKERS"])
        except ValueError:
            pass
    if "LIE_ENTROPY_BUDGET" in env:
        try:
            config.budget.max_evaluations = int(env["LIE_ENTROPY_BUDGET"])
        except ValueError:
            pass
    if env.get("LIE_ENTROPY_LOG_BASE") in ("2", "e"):
        config.entropy.log_base = env["LIE_ENTROPY_LOG_BASE"]
    if "LIE_ENTROPY_OUTPUT_DIR" in env:
        config.runner.output_dir = env["LIE_ENTROPY_OUTPUT_DIR"]

    return config
