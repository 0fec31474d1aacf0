import numpy as np
import pytest

from elastoscat.modal import Medium


@pytest.fixture
def med_std():
    """Reference medium lambda=2, mu=1 at omega=2 (kp=1, ks=2)."""
    return Medium(2.0, 1.0, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
