"""
Test Function and Rank Tests
"""

import numpy as np
import pytest

from ranklab.common.exceptions import ArgumentError
from ranklab.pde import GridSpec, SolutionField, hessian_field
from ranklab.verify import phi_field, phi_values, rank_map, rank_timeline


class TestPhiValues:
    """σ_{l+1} and the quotient correction."""

    W = np.diag([2.0, 3.0, 0.0])[None]

    def test_simple(self):
        assert phi_values(self.W, 1, quotient=False)[0] == 6.0
        assert phi_values(self.W, 0, quotient=False)[0] == 5.0

    def test_quotient(self):
        assert phi_values(self.W, 0, quotient=True)[0] == pytest.approx(5.0 + 6.0 / 5.0)
        assert phi_values(self.W, 1, quotient=True)[0] == 6.0

    def test_zero_branch(self):
        assert phi_values(self.W, 2, quotient=True)[0] == 0.0
        tiny = np.diag([1.0, 1.0, 1e-12])[None]
        assert phi_values(tiny, 2, quotient=True)[0] == pytest.approx(1e-12)

    def test_variants_on_field(self, quadratic_solution):
        hf = hessian_field(quadratic_solution, 3)
        for variant in ("simple", "bian_guan", "bian_guan_spacetime"):
            phi = phi_field(hf, 1, variant)
            assert phi.values.shape == (7, 7)
            assert np.all(phi.values == 0.0)
        assert np.all(phi_field(hf, 0, "bian_guan").values == 1.0)

    def test_invalid(self, quadratic_solution):
        hf = hessian_field(quadratic_solution, 3)
        with pytest.raises(ArgumentError):
            phi_field(hf, 3)
        with pytest.raises(ArgumentError):
            phi_field(hf, 1, "guan")


class TestRankMap:

    def test_threshold_scales_with_largest_eigenvalue(self):
        stack = np.array([np.diag([1e3, 1e-6]), np.diag([1.0, 1e-6])])
        ranks, _ = rank_map(stack, 1e-8)
        assert ranks.tolist() == [1, 2]

    def test_borderline(self):
        ranks, borderline = rank_map(np.diag([1.0, 1e-8])[None], 1e-8)
        assert ranks[0] == 1
        assert borderline[0]
        _, clear = rank_map(np.diag([1.0, 0.0])[None], 1e-8)
        assert not clear[0]

    def test_tol_positive(self):
        with pytest.raises(ArgumentError):
            rank_map(np.eye(2)[None], 0.0)


class TestRankTimeline:
    """l(t) of closed-form heat solutions."""

    def test_single_wave_rank_one(self, single_wave):
        timeline = rank_timeline(single_wave, tol=1e-6)
        assert timeline.frames == list(range(1, single_wave.count - 1))
        assert set(timeline.l_per_frame) == {1}
        assert timeline.constant
        assert timeline.monotone

    def test_two_waves_rank_two(self, two_waves):
        timeline = rank_timeline(two_waves, tol=1e-6)
        assert set(timeline.l_per_frame) == {2}
        assert timeline.constant
        assert timeline.monotone
        assert timeline.rank_at(2).shape == (15, 15)

    def test_quadratic_rank_of_q(self, quadratic_solution):
        timeline = rank_timeline(quadratic_solution, tol=1e-6)
        assert timeline.l_per_frame == [1] * 7
        assert timeline.borderline_points == 0
        spatial = rank_timeline(quadratic_solution, tol=1e-6, block="spatial")
        assert spatial.l_per_frame == [1] * 7
        assert spatial.to_dict()["block"] == "spatial"

    def test_tighter_tolerance_never_lowers_rank(self, two_waves):
        loose = rank_timeline(two_waves, tol=1e-4)
        tight = rank_timeline(two_waves, tol=1e-10)
        for m in loose.frames:
            assert np.all(tight.rank_at(m) >= loose.rank_at(m))

    def test_needs_three_frames(self):
        grid = GridSpec(1, (0.0,), (1.0,), (9,), dt=0.5, t1=0.5)
        with pytest.raises(ArgumentError):
            rank_timeline(SolutionField(grid, np.zeros((2, 9))))

    def test_unknown_block(self, quadratic_solution):
        with pytest.raises(ArgumentError):
            rank_timeline(quadratic_solution, block="temporal")
