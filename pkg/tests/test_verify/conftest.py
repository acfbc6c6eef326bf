"""
Verification Test Fixtures

Closed-form heat solutions sampled on small grids. Quadratic data on dyadic
grids give exact finite differences.
"""

import pytest

from ranklab.pde import GridSpec, exact_solution, exp_wave, quadratic_drift


def wave_grid(n, points, t1=0.01):
    h = 1.0 / (points - 1)
    return GridSpec(n, (0.0,), (1.0,), (points,), dt=h * h / 4.0, t1=t1)


def wave_solution(points, a=1.0, t1=0.01):
    return exact_solution(exp_wave([a]), wave_grid(1, points, t1))


@pytest.fixture
def quadratic_solution():
    """½x₁² + x₁/2 + t on [0,1]², rank 1 everywhere."""
    grid = GridSpec(2, (0.0,), (1.0,), (9,), dt=0.125, t1=1.0)
    return exact_solution(quadratic_drift([[1.0, 0.0], [0.0, 0.0]], b=[0.5, 0.0]), grid)


@pytest.fixture
def single_wave():
    return wave_solution(17)


@pytest.fixture
def two_waves():
    return exact_solution(exp_wave([1.0, 0.0], [0.0, 1.0]), wave_grid(2, 17))


@pytest.fixture
def opposed_waves():
    """exp(x + t) + exp(-x + t): D²u has rank 1, the spacetime Hessian rank 2."""
    return exact_solution(exp_wave([1.0], [-1.0]), wave_grid(1, 17))
