import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def ginibre(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_hermitian(rng, d):
    a = ginibre(rng, (d, d))
    return 0.5 * (a + a.conj().T)


def random_density(rng, d):
    a = ginibre(rng, (d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_density_batch(rng, n, d):
    return np.array([random_density(rng, d) for _ in range(n)])
