import numpy as np
import pytest

from modesim.stochastic import PerturbationModel
from modesim.waveguide import SlabSpec


@pytest.fixture
def default_slab() -> SlabSpec:
    """The dual-mode design guide: exactly TE0 and TE1 at 1.55 um."""
    return SlabSpec(core_width=8e-6, n_core=1.50, n_clad=1.49, wavelength=1.55e-6)


@pytest.fixture
def default_model() -> PerturbationModel:
    return PerturbationModel(sigma=0.05, corr_length=100e-6, k_ab=500.0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260808)
