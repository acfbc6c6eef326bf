"""
Differential Inequality and Verification Summary Tests
"""

import math

import numpy as np
import pytest

from ranklab.common.exceptions import ArgumentError, PreconditionError
from ranklab.models.experiment import VerifyConfig
from ranklab.operators import heat, hessian_power
from ranklab.pde import Boundary, GridSpec, SolutionField, exact_solution, hessian_field, quadratic_drift, solve
from ranklab.verify import (
    CSV_COLUMNS,
    bordered_consistency,
    case_residuals,
    diff_inequality,
    phi_field,
    phi_noise,
    psd_monitor,
    verify_solution,
)

from .conftest import wave_solution


class TestCaseResiduals:
    """CASE tags over a frame."""

    def test_quadratic_is_case2(self, quadratic_solution):
        summary = case_residuals(hessian_field(quadratic_solution, 4))
        assert summary.counts == {"CASE1": 0, "CASE2": 49}
        assert summary.max_case2_residual == 0.0
        assert summary.min_case1_gap is None
        assert summary.failures == 0

    def test_opposed_waves_are_case1(self, opposed_waves):
        summary = case_residuals(hessian_field(opposed_waves, 3))
        assert summary.counts["CASE1"] == 15
        assert summary.min_case1_gap > 0.0

    def test_concave_frame(self, quadratic_solution):
        concave = SolutionField(quadratic_solution.grid, -quadratic_solution.frames)
        hf = hessian_field(concave, 4)
        with pytest.raises(PreconditionError) as exc:
            case_residuals(hf)
        assert exc.value.details["frame"] == 4
        assert len(exc.value.details["point"]) == 2
        lenient = case_residuals(hf, strict=False)
        assert lenient.failures == 49
        assert all(report is None for report in lenient.reports.values())
        assert psd_monitor(hf) == 1.0


class TestBorderedConsistency:

    def test_expansion_holds(self, two_waves):
        result = bordered_consistency(hessian_field(two_waves, 4), 1)
        assert result["max_deviation"] < 1e-10
        assert result["upper_bound_violation"] < 1e-12

    def test_l_range(self, two_waves):
        with pytest.raises(ArgumentError):
            bordered_consistency(hessian_field(two_waves, 4), 3)


class TestDiffInequality:
    """Σ F^{ij}φ_ij - φ_t against φ + |∇φ|."""

    def test_quadratic_gives_exact_zero(self, quadratic_solution):
        report = diff_inequality(quadratic_solution, heat())
        assert report.frames == [2, 3, 4, 5, 6, 7]
        assert report.l_per_frame == [1] * 6
        assert report.max_abs_phi == 0.0
        assert report.max_abs_lhs == 0.0
        assert report.sup_ratio == 0.0
        assert report.lhs[4].shape == (5, 5)

    def test_bian_guan_on_quadratic(self, quadratic_solution):
        report = diff_inequality(quadratic_solution, heat(), variant="bian_guan")
        assert report.l_per_frame == [1] * 6
        assert report.sup_ratio == 0.0

    def test_phi_is_second_order(self):
        coarse = diff_inequality(wave_solution(17, a=0.5), heat(), l=1)
        fine = diff_inequality(wave_solution(33, a=0.5), heat(), l=1)
        order = math.log2(coarse.max_abs_phi / fine.max_abs_phi)
        assert order >= 1.8

    def test_nonlinear_coefficients(self, single_wave):
        linear = diff_inequality(single_wave, heat(), l=1)
        power = diff_inequality(single_wave, hessian_power(1), l=1)
        for m in linear.frames:
            np.testing.assert_allclose(power.lhs[m], linear.lhs[m], rtol=1e-12, atol=1e-12)

    @pytest.mark.parametrize("kwargs", [
        {"margin": 1},
        {"floor": 0.0},
        {"variant": "other"},
        {"l": 3},
    ])
    def test_invalid(self, quadratic_solution, kwargs):
        with pytest.raises(ArgumentError):
            diff_inequality(quadratic_solution, heat(), **kwargs)


class TestVerifySolution:
    """Rows and summary of a full verification."""

    def test_quadratic_summary(self, quadratic_solution):
        summary, rows = verify_solution(quadratic_solution, heat())
        assert summary["frames_verified"] == [2, 3, 4, 5, 6, 7]
        assert summary["constancy"] is True
        assert summary["monotone"] is True
        assert summary["sup_ratio"] == 0.0
        assert summary["max_case2_residual"] == 0.0
        assert summary["case_counts"] == {"CASE1": 0, "CASE2": 150}
        assert summary["quarter_ratio"] == 0.0
        assert summary["operator"]["kind"] == "heat"
        assert len(rows) == 150
        assert all(len(row) == len(CSV_COLUMNS) for row in rows)
        assert rows[0][:5] == [2, 0.25, 20, 1, "CASE2"]

    def test_stride_and_fixed_l(self, quadratic_solution):
        summary, rows = verify_solution(quadratic_solution, heat(), VerifyConfig(stride=2, l=0))
        assert summary["frames_verified"] == [2, 4, 6]
        assert summary["l"] == 0
        assert len(rows) == 75

    def test_threads_give_identical_output(self, two_waves):
        single = verify_solution(two_waves, heat(), VerifyConfig(rank_tol=1e-6), threads=1)
        pooled = verify_solution(two_waves, heat(), VerifyConfig(rank_tol=1e-6), threads=3)
        assert single == pooled

    def test_needs_four_frames(self, quadratic_solution):
        grid = quadratic_solution.grid
        short = GridSpec(2, grid.lo, grid.hi, grid.points, dt=0.5, t1=1.0)
        with pytest.raises(ArgumentError):
            verify_solution(SolutionField(short, np.zeros((3, 9, 9))), heat())


NON_DYADIC_GRIDS = [
    GridSpec(1, (0.0,), (1.0,), (13,), dt=0.0013, t1=0.1),
    GridSpec(1, (0.0,), (1.0,), (17,), dt=0.0007, t0=0.7, t1=0.8),
]


class TestRoundingLevel:
    """Quadratic data on grids whose difference quotients round."""

    @staticmethod
    def drift():
        return quadratic_drift([[1.0]], b=[0.3], c=0.1)

    @pytest.mark.parametrize("grid", NON_DYADIC_GRIDS)
    def test_closed_form_gives_zero_ratio(self, grid):
        report = diff_inequality(exact_solution(self.drift(), grid), heat())
        assert report.l_per_frame == [1] * len(report.frames)
        assert report.max_phi_noise > 0.0
        assert report.max_abs_phi == 0.0
        assert report.max_abs_lhs == 0.0
        assert report.sup_ratio == 0.0

    @pytest.mark.parametrize("grid", NON_DYADIC_GRIDS)
    def test_solved_gives_zero_ratio(self, grid):
        sampler = self.drift().sampler(grid)
        sol = solve(heat(), sampler(grid.t0), grid, Boundary.exact(sampler))
        report = diff_inequality(sol, heat())
        assert report.max_abs_phi == 0.0
        assert report.sup_ratio == 0.0

    def test_raw_phi_is_rounding_sized(self):
        grid = NON_DYADIC_GRIDS[0]
        sol = exact_solution(self.drift(), grid)
        hf = hessian_field(sol, 5)
        raw = np.abs(phi_field(hf, 1).values).max()
        assert raw <= phi_noise(sol, hf, 1)
        assert phi_noise(sol, hf, 1) < 1e-6

    def test_wave_phi_stays_above_rounding(self, single_wave):
        hf = hessian_field(single_wave, 4)
        assert np.abs(phi_field(hf, 1).values).min() > 100 * phi_noise(single_wave, hf, 1)

    def test_summary_reports_noise_level(self):
        summary, _ = verify_solution(exact_solution(self.drift(), NON_DYADIC_GRIDS[0]), heat())
        assert summary["sup_ratio"] == 0.0
        assert summary["max_abs_phi"] == 0.0
        assert summary["max_phi_noise"] > 0.0
