"""
PDE Test Fixtures

Dyadic grids keep finite differences of quadratic closed forms exact.
"""

import pytest

from ranklab.pde import GridSpec


@pytest.fixture
def dyadic_grid_1d():
    return GridSpec(1, (0.0,), (1.0,), (9,), dt=0.125, t0=0.0, t1=1.0)


@pytest.fixture
def dyadic_grid_2d():
    return GridSpec(2, (0.0,), (1.0,), (9,), dt=0.125, t0=0.0, t1=1.0)


def heat_grid(points, t1=0.0625):
    """Unit interval with dt = h²/4."""
    h = 1.0 / (points - 1)
    return GridSpec(1, (0.0,), (1.0,), (points,), dt=h * h / 4.0, t0=0.0, t1=t1)
