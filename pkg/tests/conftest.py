from fractions import Fraction

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nsdi.devices import mixture
from nsdi.polytope import vertices

settings.register_profile("nsdi", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("nsdi")


def random_rational_device(rng: np.random.Generator, max_support: int = 10, nonlocal_bias: bool = True):
    """Exact (2,2,2,2) NS device: a rational mixture of a few polytope vertices,
    by default led by a heavy nonlocal vertex."""
    vs = vertices().vertices
    k = int(rng.integers(2, max_support + 1))
    if nonlocal_bias:
        lead = int(rng.integers(16, 24))
        rest = rng.choice([i for i in range(24) if i != lead], size=k - 1, replace=False)
        idx = [lead] + [int(i) for i in rest]
    else:
        idx = [int(i) for i in rng.choice(24, size=k, replace=False)]
    w = rng.integers(1, 20, size=k)
    if nonlocal_bias:
        w[0] += int(rng.integers(0, 60))
    s = int(w.sum())
    return mixture([Fraction(int(a), s) for a in w], [vs[i] for i in idx])


def random_float_device(rng: np.random.Generator):
    vs = vertices().vertices
    w = rng.dirichlet(np.full(24, 0.3))
    return mixture(list(w), [v.as_float() for v in vs])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
