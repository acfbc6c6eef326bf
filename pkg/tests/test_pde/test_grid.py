"""
Grid and Closed-Form Tests
"""

import math

import numpy as np
import pytest

from ranklab.common.exceptions import ArgumentError
from ranklab.models.experiment import GridConfig, InitialConfig
from ranklab.pde import (
    ClosedForm,
    GridSpec,
    SolutionField,
    closed_form_from_config,
    exact_solution,
    exp_wave,
    quadratic_drift,
    spatial_derivatives,
    superposition,
)


class TestGridSpec:
    """Uniform spacetime grids."""

    def test_broadcast_and_spacing(self, dyadic_grid_2d):
        grid = dyadic_grid_2d
        assert grid.points == (9, 9)
        assert grid.h == (0.125, 0.125)
        assert grid.frames == 9
        assert grid.coordinates.shape == (9, 9, 2)
        np.testing.assert_array_equal(grid.times, np.arange(9) * 0.125)

    def test_frames_round_down(self):
        grid = GridSpec(1, (0.0,), (1.0,), (9,), dt=0.3, t1=1.0)
        assert grid.frames == 4

    def test_interior(self, dyadic_grid_1d):
        assert dyadic_grid_1d.interior(2) == (slice(2, 7),)
        assert dyadic_grid_1d.boundary_mask().sum() == 2
        with pytest.raises(ArgumentError):
            dyadic_grid_1d.interior(5)

    @pytest.mark.parametrize("kwargs", [
        {"n": 4, "lo": (0.0,), "hi": (1.0,), "points": (9,), "dt": 0.1},
        {"n": 1, "lo": (1.0,), "hi": (0.0,), "points": (9,), "dt": 0.1},
        {"n": 1, "lo": (0.0,), "hi": (1.0,), "points": (7,), "dt": 0.1},
        {"n": 1, "lo": (0.0,), "hi": (1.0,), "points": (258,), "dt": 0.1},
        {"n": 1, "lo": (0.0,), "hi": (1.0,), "points": (9,), "dt": 0.0},
        {"n": 2, "lo": (0.0, 0.0, 0.0), "hi": (1.0,), "points": (9,), "dt": 0.1},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ArgumentError):
            GridSpec(**kwargs)

    def test_from_config(self):
        grid = GridSpec.from_config(GridConfig(n=2, points=[17, 9], dt=0.01, t1=0.05))
        assert grid.points == (17, 9)
        assert grid.lo == (0.0, 0.0)
        assert grid.frames == 6

    def test_solution_shape_checked(self, dyadic_grid_1d):
        with pytest.raises(ArgumentError):
            SolutionField(dyadic_grid_1d, np.zeros((3, 9)))
        frames = np.zeros((9, 9))
        frames[4, 4] = np.nan
        with pytest.raises(ArgumentError) as exc:
            SolutionField(dyadic_grid_1d, frames)
        assert exc.value.details["frame"] == 4


class TestClosedForms:
    """Heat solutions with exact spacetime Hessians."""

    def test_exp_wave_value(self):
        u = exp_wave([1.0])
        assert u.value(np.array([0.5]), 0.25) == pytest.approx(math.exp(0.75))

    def test_exp_wave_hessian(self):
        u = exp_wave([1.0, 0.0])
        H = u.spacetime_hessian(np.array([0.2, 0.7]), 0.1)
        expected = math.exp(0.3) * np.array([[1.0, 0.0, 1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 1.0]])
        np.testing.assert_allclose(H, expected, rtol=1e-14)

    def test_two_waves_have_rank_two(self):
        u = exp_wave([1.0, 0.0], [0.0, 1.0])
        H = u.spacetime_hessian(np.array([0.3, 0.4]), 0.0)
        assert np.linalg.matrix_rank(H, tol=1e-10) == 2

    def test_quadratic_drift(self):
        u = quadratic_drift(np.diag([2.0, 0.0]), b=[1.0, 0.0], c=3.0)
        assert u.value(np.array([1.0, 5.0]), 0.5) == 1.0 + 1.0 + 3.0 + 1.0
        H = u.spacetime_hessian(np.array([1.0, 5.0]), 0.5)
        np.testing.assert_array_equal(H, np.diag([2.0, 0.0, 0.0]))

    def test_quadratic_needs_psd(self):
        with pytest.raises(ArgumentError):
            quadratic_drift(np.diag([1.0, -1.0]))

    def test_superposition(self):
        u = superposition([[1.0]], Q=[[2.0]])
        assert u.value(np.array([0.0]), 0.0) == 1.0
        H = u.spacetime_hessian(np.array([0.0]), 0.0)
        np.testing.assert_allclose(H, [[3.0, 1.0], [1.0, 1.0]])

    def test_solves_heat_equation(self, rng):
        u = superposition([[0.5, -1.0], [1.0, 0.25]], Q=[[1.0, 0.5], [0.5, 1.0]], b=[0.2, 0.1])
        for _ in range(10):
            x = rng.uniform(-1, 1, size=2)
            t = float(rng.uniform(0, 1))
            H = u.spacetime_hessian(x, t)
            assert H[2, 2] == pytest.approx(
                sum(np.sum(w ** 2) ** 2 * math.exp(w @ x + np.sum(w ** 2) * t)
                    for w in np.array([[0.5, -1.0], [1.0, 0.25]])), rel=1e-12)
            h = 1e-4
            u_t = (u.value(x, t + h) - u.value(x, t - h)) / (2 * h)
            assert u_t == pytest.approx(np.trace(H[:2, :2]), rel=1e-6)

    def test_from_config(self):
        closed = closed_form_from_config(InitialConfig(kind="exp_wave", waves="1,0;0,1"), 2)
        assert closed.label == "exp_wave"
        assert closed.waves.shape == (2, 2)
        with pytest.raises(ArgumentError):
            closed_form_from_config(InitialConfig(kind="quadratic_drift"), 2)
        with pytest.raises(ArgumentError):
            closed_form_from_config(InitialConfig(kind="exp_wave"), 1)

    def test_wave_dimension_checked(self):
        with pytest.raises(ArgumentError):
            ClosedForm(2, waves=[[1.0, 0.0, 0.0]])

    def test_exact_solution_dimension(self, dyadic_grid_1d):
        with pytest.raises(ArgumentError):
            exact_solution(exp_wave([1.0, 0.0]), dyadic_grid_1d)
        sol = exact_solution(exp_wave([1.0]), dyadic_grid_1d)
        assert sol.count == 9
        assert sol.frames[3, 2] == pytest.approx(math.exp(0.25 + 0.375))


class TestStencils:
    """Central differences on the interior window."""

    def test_quadratic_is_exact(self, dyadic_grid_2d):
        u = quadratic_drift([[1.0, 0.5], [0.5, 2.0]], b=[1.0, -1.0]).sampler(dyadic_grid_2d)(0.0)
        D2, Du = spatial_derivatives(u, dyadic_grid_2d.h)
        assert D2.shape == (7, 7, 2, 2)
        np.testing.assert_array_equal(D2, np.broadcast_to([[1.0, 0.5], [0.5, 2.0]], D2.shape))
        np.testing.assert_array_equal(D2, np.swapaxes(D2, -1, -2))
        x = dyadic_grid_2d.coordinates[1:-1, 1:-1]
        expected = x @ np.array([[1.0, 0.5], [0.5, 2.0]]) + np.array([1.0, -1.0])
        np.testing.assert_allclose(Du, expected, atol=1e-14)

    def test_margin_shrinks_window(self, dyadic_grid_1d):
        u = np.arange(9.0) ** 2
        D2, _ = spatial_derivatives(u, dyadic_grid_1d.h, margin=2)
        assert D2.shape == (5, 1, 1)
