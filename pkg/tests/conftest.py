import os

import pytest

from kaczlab import build_model, gen_gaussian, make_distribution
from kaczlab.seeding import rng_from

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "fixtures")


def random_instance(m, n, seed, noise_scale=1.0):
    """A seeded (system, distribution, eta, z0) tuple for oracle tests."""
    sys = gen_gaussian(m, n, 1.0, seed)
    rng = rng_from(seed, 0xBEEF)
    dist = make_distribution(rng.random(m) + 0.2)
    eta = noise_scale * rng.standard_normal(m)
    z0 = rng.standard_normal(n)
    return sys, dist, eta, z0


def random_model(m, n, seed, noise_scale=1.0):
    sys, dist, eta, z0 = random_instance(m, n, seed, noise_scale)
    return build_model(sys, dist, eta), z0


@pytest.fixture
def fixture_dir():
    return FIXTURE_DIR
