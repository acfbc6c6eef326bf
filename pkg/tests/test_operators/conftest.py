"""
Operator Test Fixtures
"""

import numpy as np
import pytest

from ranklab.models.experiment import CheckConfig
from ranklab.operators import custom, heat, hessian_power


def random_spd(rng, n, lo=0.5, hi=2.0):
    G = rng.standard_normal((n, n))
    Q, _ = np.linalg.qr(G)
    A = (Q * rng.uniform(lo, hi, size=n)) @ Q.T
    return 0.5 * (A + A.T)


@pytest.fixture
def heat_operator():
    return heat()


@pytest.fixture
def sigma2_operator():
    return hessian_power(2)


@pytest.fixture
def trace_minus_u2():
    return custom("trace_minus_u_squared")


@pytest.fixture
def small_sampling():
    """A reduced sampling box that keeps structure checks quick."""
    return CheckConfig(num_points=12, num_directions=8, num_chords=2, chord_points=33, seed=7)
