import numpy as np
import pytest

from skewlab.fiber_measure import AtomicMeasure


def random_signed_measure(rng, n_atoms, zero_mass=False, scale=1.0):
    pos = rng.random(n_atoms)
    wts = scale * rng.normal(size=n_atoms)
    if zero_mass:
        wts -= wts.mean()
    return AtomicMeasure(pos, wts)


def random_probability_measure(rng, n_atoms):
    pos = rng.random(n_atoms)
    wts = rng.random(n_atoms) + 1e-3
    wts /= wts.sum()
    return AtomicMeasure(pos, wts)


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
