#!/usr/bin/env python3
"""Unit tests for the exponent f on J, its maximum, Hessian and boundary values."""
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

# Add rootfs/usr/bin to Python path
sys.path.insert(0, str(Path(__file__).parent.parent.parent / "rootfs" / "usr" / "bin"))

import landscape as ls
from errors import DomainError

INTERIOR_POINTS = [
    (0.25, 0.05, 0.05, 0.05, 0.05),
    (0.2, 0.1, 0.1, 0.05, 0.03),
    (0.35, 0.2, 0.05, 0.1, 0.3),
    (0.1, 0.02, 0.3, 0.2, 0.07),
]


class TestMembership:
    """Tests for J and its boundary."""

    def test_maximum_is_interior(self):
        """z~ lies strictly inside J."""
        assert ls.Z_TILDE.in_J()
        assert ls.Z_TILDE.is_interior()

    def test_printed_corner_outside_J(self):
        """(0, 1/2, 0, 0, 1/2) violates z00 <= z."""
        assert not ls.ZVector(0.0, 0.5, 0.0, 0.0, 0.5).in_J()
        with pytest.raises(DomainError):
            ls.f_of((0.0, 0.5, 0.0, 0.0, 0.5))

    def test_uniform_samples_in_J(self):
        """Every sampled point belongs to J."""
        points = ls.sample_uniform_J(2000, 3)
        assert points.shape == (2000, 5)
        assert all(ls.ZVector(*row).in_J() for row in points)

    def test_boundary_distance(self):
        """The smallest slack of z~ is z00 = 1/20."""
        assert ls.boundary_distance(ls.Z_TILDE) == pytest.approx(0.05)


class TestExponent:
    """Tests for f, g and the gradient."""

    def test_value_at_maximum(self):
        """f(z~) = log(25/8)."""
        assert ls.f_of(ls.Z_TILDE) == pytest.approx(math.log(25 / 8), abs=1e-13)

    def test_gradient_vanishes_at_maximum(self):
        """All five partials are zero at z~."""
        assert np.max(np.abs(ls.grad_f(ls.Z_TILDE))) < 1e-12

    def test_stationary_polynomials_vanish(self):
        """P, P00, P01, P10, P11 are zero at z~."""
        polys = ls.stationary_polys(ls.Z_TILDE)
        assert sorted(polys) == ["P", "P00", "P01", "P10", "P11"]
        assert all(abs(v) < 1e-12 for v in polys.values())

    def test_symmetry(self):
        """Exchanging the orientations leaves f unchanged."""
        for zv in INTERIOR_POINTS:
            point = ls.ZVector(*zv)
            assert ls.f_of(point.swapped()) == pytest.approx(ls.f_of(point), abs=1e-13)

    @pytest.mark.parametrize("zv", INTERIOR_POINTS)
    def test_printed_dz00_matches(self, zv):
        """The displayed df/dz00 equals the gradient's second component."""
        assert ls.dz00_printed(zv) == pytest.approx(ls.grad_f(zv)[1], abs=1e-12)

    def test_gradient_against_finite_differences(self):
        """Closed-form partials match central differences away from the boundary."""
        assert ls.gradient_check(100, 5) < 1e-6

    def test_g_at_maximum(self):
        """g(z~, n)(pi n)^(5/2) = 5^5 / 2 for every n."""
        for n in (10, 1000):
            scaled = ls.g_of(ls.Z_TILDE, n) * (math.pi * n) ** 2.5
            assert scaled == pytest.approx(ls.G_TILDE_SCALED, rel=1e-12)

    def test_g_needs_interior(self):
        """g has zero factors on the boundary."""
        with pytest.raises(DomainError):
            ls.g_of((0.25, 0.0, 0.05, 0.05, 0.05), 10)

    def test_b_of(self):
        """b(z~) = 5/4."""
        assert ls.b_of(ls.Z_TILDE) == pytest.approx(1.25)


class TestEliminants:
    """Tests for the reduced stationary equations."""

    @pytest.mark.parametrize("z00", [0.0, 0.05, 0.1, 0.3, 0.5])
    def test_p7_factorisation(self, z00):
        """P7(1/4, z00) = -(15/16)(20 z00 - 1)(96 z00^2 - 84 z00 - 1)."""
        assert ls.p7_of(0.25, z00) == pytest.approx(ls.p7_factored_at_quarter(z00), abs=1e-10)

    def test_p7_root_at_maximum(self):
        """z00 = 1/20 is a root at z = 1/4."""
        assert abs(ls.p7_of(0.25, 0.05)) < 1e-12

    @pytest.mark.parametrize("x", [0.0, 0.05, 0.2, 0.4])
    def test_p01_quadratic(self, x):
        """P01 on the symmetric line is (1/20)(20x - 1)(24x - 23)."""
        expected = (20 * x - 1) * (24 * x - 23) / 20
        assert ls.p01_star_at_tilde(x) == pytest.approx(expected, abs=1e-12)


class TestFaces:
    """Tests for the face z = z00 = z11 = 0."""

    def test_diagonal_slope_zero_at_quarter(self):
        """d f_bar(t, t)/dt vanishes at t = 1/4."""
        assert ls.f_bar_diagonal_slope(0.25) == pytest.approx(0.0, abs=1e-15)

    def test_diagonal_slope_matches_differences(self):
        """The closed-form slope agrees with a central difference."""
        t, h = 0.1, 1e-6
        numeric = (ls.f_bar(t + h, t + h) - ls.f_bar(t - h, t - h)) / (2 * h)
        assert ls.f_bar_diagonal_slope(t) == pytest.approx(numeric, abs=1e-6)

    def test_diagonal_scan(self):
        """The only stationary point on the diagonal is t = 1/4, below log(25/8)."""
        found = ls.diagonal_scan(401)
        assert len(found) == 1
        t, value = found[0]
        assert t == pytest.approx(0.25, abs=1e-6)
        assert value < ls.LOG_25_8

    def test_f_bar_domain(self):
        """Arguments outside [0, 1/2]^2 are rejected."""
        with pytest.raises(DomainError):
            ls.f_bar(0.6, 0.1)
        with pytest.raises(DomainError):
            ls.f_bar_diagonal_slope(0.0)

    def test_f_bar_maximum_below_interior(self):
        """The face maximum is below f(z~)."""
        (a, c), value = ls.f_bar_maximize(n_starts=8, seed=1)
        assert 0 <= a <= 0.5 and 0 <= c <= 0.5
        assert value >= ls.f_bar(0.25, 0.25) - 1e-6
        assert value < ls.LOG_25_8


class TestBoundaryReport:
    """Tests for the two boundary candidates."""

    def test_candidates(self):
        """Both corners evaluate to half of log(25/8), not the displayed log(5/8)."""
        zero, half = ls.boundary_report()
        for candidate in (zero, half):
            assert candidate.computed_value == pytest.approx(ls.LOG_25_8 / 2, abs=1e-12)
            assert candidate.printed_value == pytest.approx(math.log(5 / 8))
            assert candidate.below_maximum
            assert candidate.notes
        assert half.evaluated_point == ls.ZVector(0.5, 0.5, 0.0, 0.0, 0.5)
        assert not half.printed_point.in_J()
        assert half.to_dict()["below_maximum"] is True


class TestHessian:
    """Tests for B and its spectrum."""

    def test_numeric_hessian_matches_printed(self):
        """Richardson differences of grad f reproduce (1/10) x the integer matrix."""
        b = ls.hessian_at(ls.Z_TILDE)
        assert b.asymmetry == 0.0
        assert b.max_deviation_from(np.array(ls.B_EXACT, dtype=float)) < 1e-5

    def test_spectrum(self):
        """Eigenvalues (-37 +/- sqrt 697)/4 and -25/2 (three times); det B = -328125/4."""
        spectrum = ls.spectrum_B()
        assert spectrum.determinant == Fraction(-328125, 4) == ls.DET_B_EXACT
        assert np.allclose(spectrum.eigenvalues, ls.EIGENVALUES_CLOSED, atol=1e-10)
        assert spectrum.negative_definite
        assert max(spectrum.eigenvalues) < -2.6
        assert spectrum.to_dict()["determinant"] == "-328125/4"

    def test_laplace_coefficient(self):
        """g(z~)(pi n)^(5/2)/sqrt|det B| = 25/sqrt(21)."""
        assert ls.laplace_coefficient() == pytest.approx(25 / math.sqrt(21), rel=1e-12)
        assert ls.laplace_coefficient(1000) == pytest.approx(25 / math.sqrt(21), rel=1e-12)
        assert ls.laplace_coefficient_squared() == Fraction(625, 21)

    def test_taylor_residual_is_cubic(self):
        """f(z~ + y) - log(25/8) - y'By is small against the quadratic term."""
        y = (1e-4,) * 5
        quadratic = ls.HessianB(np.array(ls.B_EXACT, dtype=float)).quadratic_form(y)
        assert quadratic == pytest.approx(-5.92e-7, rel=1e-9)
        assert abs(ls.taylor_residual(y)) < 0.05 * abs(quadratic)

    def test_taylor_residual_decays_cubically(self):
        """Shrinking |y| tenfold shrinks the residual about a thousandfold."""
        rng = np.random.default_rng(2024)
        ratios = []
        for _ in range(21):
            direction = ls.YVector(*rng.normal(size=5))
            unit = np.asarray(direction) / direction.norm
            small = ls.taylor_residual(1e-3 * unit)
            large = ls.taylor_residual(1e-2 * unit)
            ratios.append(abs(small / large))
        assert 1e-3 / 3 < float(np.median(ratios)) < 3e-3

    def test_hessian_needs_room(self):
        """A step larger than the boundary distance is rejected."""
        with pytest.raises(DomainError):
            ls.hessian_at(ls.Z_TILDE, step=0.1)

    def test_hessian_shape_checked(self):
        """HessianB must be 5 x 5."""
        with pytest.raises(DomainError):
            ls.HessianB(np.eye(3))


class TestMaximize:
    """Tests for the multistart maximiser."""

    def test_global_maximum(self):
        """The best local maximum is z~ with value log(25/8)."""
        found = ls.maximize_f(n_starts=8, seed=0)
        best = found.best
        assert max(abs(a - b) for a, b in zip(best.point, ls.Z_TILDE)) < 1e-4
        assert best.value == pytest.approx(ls.LOG_25_8, abs=1e-7)
        assert sum(m.starts for m in found.maxima) == 8

    def test_boundary_candidates_reported(self):
        """The maximiser also evaluates both boundary candidates, which tie by symmetry."""
        found = ls.maximize_f(n_starts=2, seed=1)
        zero, half = found.boundary
        assert zero.computed_value == pytest.approx(half.computed_value, abs=1e-12)
        assert found.highest_reported <= ls.LOG_25_8 + 1e-6
        assert len(found.to_dict()["boundary"]) == 2

    def test_needs_a_start(self):
        """At least one start is required."""
        with pytest.raises(DomainError):
            ls.maximize_f(n_starts=0)

    def test_sampled_values_below_maximum(self):
        """No uniform sample of J beats f(z~)."""
        best = ls.max_f_on_sample(20_000, 7)
        assert best < ls.LOG_25_8
        assert best > 0.8
