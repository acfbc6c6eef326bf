"""
Storage Test Fixtures
"""

import pytest

from ranklab.pde import GridSpec, exact_solution, exp_wave
from ranklab.storage import write_solution


@pytest.fixture
def wave_grid():
    return GridSpec(2, (0.0, -1.0), (1.0, 1.0), (9, 17), dt=0.01, t0=0.5, t1=0.55)


@pytest.fixture
def wave_solution(wave_grid):
    return exact_solution(exp_wave([1.0, 0.5]), wave_grid)


@pytest.fixture
def solution_file(tmp_path, wave_solution):
    return write_solution(wave_solution, tmp_path / "solution.bin")
