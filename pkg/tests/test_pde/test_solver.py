"""
Explicit Solver and Derivative Field Tests
"""

import numpy as np
import pytest

from ranklab.common.exceptions import ArgumentError, DivergenceError, StabilityError
from ranklab.operators import heat, hessian_power, linear
from ranklab.pde import (
    Boundary,
    GridSpec,
    exact_solution,
    exp_wave,
    hessian_field,
    quadratic_drift,
    residual_field,
    solve,
    spatial_hessian_field,
    stability_bound,
)

from .conftest import heat_grid


def _final_error(points):
    grid = heat_grid(points)
    closed = exp_wave([1.0])
    sampler = closed.sampler(grid)
    sol = solve(heat(), sampler(grid.t0), grid, Boundary.exact(sampler))
    assert sol.time(sol.count - 1) == pytest.approx(0.0625)
    return float(np.max(np.abs(sol.frames[-1] - sampler(grid.times[-1]))))


class TestSolve:
    """Forward Euler on the heat equation and its failure modes."""

    @pytest.mark.slow
    def test_second_order_convergence(self):
        coarse = _final_error(65)
        fine = _final_error(129)
        assert 3.5 <= coarse / fine <= 4.5

    def test_quadratic_is_reproduced(self):
        grid = GridSpec(1, (0.0,), (1.0,), (9,), dt=1.0 / 256, t1=1.0 / 16)
        closed = quadratic_drift([[1.0]], b=[0.5])
        sampler = closed.sampler(grid)
        sol = solve(heat(), sampler(0.0), grid, Boundary.exact(sampler))
        np.testing.assert_allclose(sol.frames, exact_solution(closed, grid).frames, atol=1e-14)

    def test_frozen_boundary(self):
        grid = heat_grid(17, t1=0.01)
        u0 = exp_wave([1.0]).sampler(grid)(0.0)
        sol = solve(heat(), u0, grid)
        np.testing.assert_array_equal(sol.frames[:, 0], np.full(sol.count, u0[0]))
        np.testing.assert_array_equal(sol.frames[:, -1], np.full(sol.count, u0[-1]))

    def test_threads_do_not_change_frames(self):
        grid = GridSpec(2, (0.0,), (1.0,), (17,), dt=1.0 / 2048, t1=1.0 / 128)
        sampler = exp_wave([1.0, 0.5]).sampler(grid)
        single = solve(heat(), sampler(0.0), grid, Boundary.exact(sampler), threads=1)
        pooled = solve(heat(), sampler(0.0), grid, Boundary.exact(sampler), threads=3)
        np.testing.assert_array_equal(single.frames, pooled.frames)

    def test_linear_step_too_large(self):
        grid = GridSpec(1, (0.0,), (1.0,), (17,), dt=0.01, t1=0.1)
        with pytest.raises(StabilityError) as exc:
            solve(heat(), np.zeros(17), grid)
        assert exc.value.details["bound"] == pytest.approx(1.0 / 512)
        assert exc.value.details["frame"] == 0

    def test_nonlinear_step_too_large(self):
        grid = GridSpec(1, (0.0,), (1.0,), (17,), dt=0.01, t1=0.1)
        u0 = exp_wave([1.0]).sampler(grid)(0.0)
        with pytest.raises(StabilityError) as exc:
            solve(hessian_power(1), u0, grid)
        assert exc.value.details["bound"] == pytest.approx(1.0 / 512)

    def test_bound_scales_with_coefficient(self):
        grid = heat_grid(17)
        assert stability_bound(linear([[2.0]]), grid) == pytest.approx(grid.h[0] ** 2 / 4)
        assert stability_bound(linear([[0.0]]), grid) == np.inf
        with pytest.raises(ArgumentError):
            stability_bound(hessian_power(1), grid)

    def test_divergence_reports_frame(self):
        grid = GridSpec(1, (0.0,), (1.0,), (17,), dt=1e-3, t1=1.0)
        with pytest.raises(DivergenceError) as exc:
            solve(linear(potential=1e4), np.ones(17), grid)
        assert 1 <= exc.value.details["frame"] < grid.frames

    def test_initial_frame_checked(self):
        grid = heat_grid(17)
        with pytest.raises(ArgumentError):
            solve(heat(), np.zeros(16), grid)
        with pytest.raises(ArgumentError):
            solve(heat(), np.full(17, np.nan), grid)

    def test_boundary_kind_checked(self):
        with pytest.raises(ArgumentError):
            Boundary("periodic")
        with pytest.raises(ArgumentError):
            Boundary("exact")


class TestDerivativeFields:
    """Spacetime Hessians and residuals from stored frames."""

    @pytest.fixture
    def quadratic_solution(self, dyadic_grid_2d):
        closed = quadratic_drift(np.diag([1.0, 0.0]), b=[0.5, 0.0])
        return exact_solution(closed, dyadic_grid_2d)

    def test_quadratic_hessians_are_exact(self, quadratic_solution):
        field = hessian_field(quadratic_solution, 4)
        assert field.shape == (7, 7)
        assert field.t == 0.5
        np.testing.assert_allclose(field.matrices, np.broadcast_to(np.diag([1.0, 0.0, 0.0]), (7, 7, 3, 3)),
                                   atol=1e-12)
        np.testing.assert_allclose(field.mixed, 0.0, atol=1e-12)
        np.testing.assert_allclose(field.temporal, 0.0, atol=1e-12)
        assert field.spatial.shape == (7, 7, 2, 2)
        assert len(list(field.points())) == 49
        assert field.point_indices()[0, 0] == 10
        assert field.coordinates()[0, 0].tolist() == [0.125, 0.125]

    def test_hessian_of_single_point(self, quadratic_solution):
        H = hessian_field(quadratic_solution, 4).hessian((3, 3))
        assert H.temporal == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(H.spatial.entries, np.diag([1.0, 0.0]), atol=1e-12)

    def test_wave_hessians_converge(self):
        grid = heat_grid(33, t1=0.01)
        closed = exp_wave([1.0])
        field = hessian_field(exact_solution(closed, grid), 2)
        exact = closed.spacetime_hessian(field.coordinates(), field.t)
        np.testing.assert_allclose(field.matrices, exact, rtol=1e-3)

    def test_frame_range(self, quadratic_solution):
        for m in (0, quadratic_solution.count - 1):
            with pytest.raises(ArgumentError):
                hessian_field(quadratic_solution, m)
        with pytest.raises(ArgumentError):
            hessian_field(quadratic_solution, 4, margin=0)
        with pytest.raises(ArgumentError):
            hessian_field(quadratic_solution, 4, margin=5)
        assert hessian_field(quadratic_solution, 4, margin=4).shape == (1, 1)

    def test_spatial_field(self, quadratic_solution):
        last = quadratic_solution.count - 1
        D2 = spatial_hessian_field(quadratic_solution, last)
        np.testing.assert_allclose(D2, np.broadcast_to(np.diag([1.0, 0.0]), (7, 7, 2, 2)), atol=1e-12)
        with pytest.raises(ArgumentError):
            spatial_hessian_field(quadratic_solution, last + 1)

    def test_residual_of_exact_solution(self, quadratic_solution):
        residual = residual_field(quadratic_solution, heat(), 3)
        np.testing.assert_allclose(residual, 0.0, atol=1e-12)
        with pytest.raises(ArgumentError):
            residual_field(quadratic_solution, heat(), quadratic_solution.count - 1)
