import numpy as np
import pytest
from hypothesis import settings

from floqavg import ToleranceConfig, build_eigenspace
from floqavg.twolevel import TwoLevelParams

settings.register_profile("default", deadline=None, derandomize=True)
settings.load_profile("default")

SQRT2 = np.sqrt(2.0)
SWEEP_V = np.linspace(0.1, 2.5, 16)


@pytest.fixture(scope="session")
def resonant():
    return TwoLevelParams.first_resonance()


@pytest.fixture(scope="session")
def resonant_es(resonant):
    return build_eigenspace(resonant.hamiltonian(), ToleranceConfig(xi=1e-2, fourier_cutoff=8))


@pytest.fixture(scope="session")
def v1_params():
    return TwoLevelParams(1.0, 1.5, 1.0, 0.0)


@pytest.fixture(scope="session")
def v1_es(v1_params):
    return build_eigenspace(v1_params.hamiltonian(), ToleranceConfig(xi=1e-2))


def perturbed(v):
    return TwoLevelParams.first_resonance(v_static=v)
