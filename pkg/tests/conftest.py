import numpy as np
import pytest

from hybridcast.synth import SyntheticSpec, generate_synthetic_panel


@pytest.fixture(scope="session")
def default_panel():
    """Full-size default panel (1060 weekdays, 53 indicators), seed 0."""
    return generate_synthetic_panel(SyntheticSpec(seed=0))


@pytest.fixture(scope="session")
def small_panel():
    """Short panel for training tests: same 53 indicators, 90 weekdays."""
    return generate_synthetic_panel(SyntheticSpec(n_days=90, seed=3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
