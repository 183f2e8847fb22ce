import numpy as np
import pytest

from demplast.material import ElasticConstants, HardeningLaw

MU = 384.62
KAPPA = 833.33
SY0 = 50.0


@pytest.fixture
def consts():
    return ElasticConstants(mu=MU, kappa=KAPPA)


@pytest.fixture
def iso_law():
    return HardeningLaw(sigma_y0=SY0, H=500.0, C=0.0, mode="isotropic")


@pytest.fixture
def kin_law():
    return HardeningLaw(sigma_y0=SY0, H=0.0, C=500.0, mode="kinematic")


def rand_sym(rng, shape=(), scale=1.0):
    """Random packed symmetric tensors, entries O(scale)."""
    return scale * rng.standard_normal(shape + (6,))
