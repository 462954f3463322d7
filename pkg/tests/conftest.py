"""Test configuration and fixtures for lie-entropy."""

import os
import tempfile

import numpy as np
import pytest
import yaml

from lie_entropy.config import BudgetConfig, Configuration, EntropyConfig, RunnerConfig
from lie_entropy.coverage import AdmissiblePair
from lie_entropy.presets import euclid_ab, euclidean_system, get_preset
from lie_entropy.regions import BoxRegion


@pytest.fixture
def rng():
    """Seeded random generator."""
    return np.random.default_rng(12345)


@pytest.fixture
def sample_config():
    """Configuration with small budgets and a single worker."""
    return Configuration(
        budget=BudgetConfig(max_evaluations=5_000_000, exact_universe_cap=2_000, exact_node_cap=200_000),
        entropy=EntropyConfig(log_base="2", min_fit_points=3),
        runner=RunnerConfig(max_workers=2, output_dir="results", include_timings=False),
    )


@pytest.fixture(params=["euclid_ab", "aff_example", "heisenberg_example", "torus_cat"])
def preset_system(request):
    """Each built-in system in turn."""
    return get_preset(request.param)


@pytest.fixture
def scalar_system():
    """x' = 2x + u with U = [-1, 1] sampled at delta = 2/15."""
    return euclid_ab()


@pytest.fixture
def stable_system():
    """x' = x/2 + u, a contraction."""
    return euclidean_system([[0.5]], [[1.0]], -1.0, 1.0, 0.5, name="stable")


@pytest.fixture
def scalar_pair(scalar_system):
    """K = [-0.5, 0.5] at resolution 1/64 inside Q = [-1, 1]."""
    return AdmissiblePair.from_regions(scalar_system.group, BoxRegion([-0.5], [0.5]), 1.0 / 64.0, BoxRegion([-1.0], [1.0]), 0.1)


@pytest.fixture
def scenario_text():
    """A small valid scenario for the scalar system."""
    return """name: small_scalar
preset: euclid_ab
delta: 0.13333333333333333
pair:
  K_lower: [-0.5]
  K_upper: [0.5]
  rho: 0.015625
  Q_lower: [-1.0]
  Q_upper: [1.0]
eps_list: [0.2, 0.1]
n_range: [2, 6]
mode: greedy
log_base: "2"
seed: 7
"""


@pytest.fixture
def scenario_file(scenario_text):
    """The small scenario written to a temporary YAML file."""
    with tempfile.NamedTemporaryFile(suffix=".yaml", mode="w+", delete=False) as f:
        f.write(scenario_text)
        path = f.name

    yield path

    # Cleanup
    if os.path.exists(path):
        os.unlink(path)


@pytest.fixture
def temp_config_file():
    """Create a temporary configuration file."""
    with tempfile.NamedTemporaryFile(suffix=".yaml", mode="w+", delete=False) as f:
        config = {
            "budget": {"max_evaluations": 1234},
            "entropy": {"log_base": "e", "upper_tolerance": 0.3},
            "runner": {"max_workers": 1, "output_dir": "custom"},
            "unknown_section": {"x": 1},
        }
        yaml.dump(config, f)
        path = f.name

    yield path

    # Cleanup
    if os.path.exists(path):
        os.unlink(path)
