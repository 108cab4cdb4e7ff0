#!/usr/bin/env python3
"""Unit tests for lambda_k, mu_k, delta_k and the joint moments E(Y X_k) / E Y."""
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

# Add rootfs/usr/bin to Python path
sys.path.insert(0, str(Path(__file__).parent.parent.parent / "rootfs" / "usr" / "bin"))

import conditioning as cd
from errors import DomainError, SizeCapError


class TestConstants:
    """Tests for the closed-form constants."""

    def test_lambda(self):
        """lambda_k = 4^k / 2k."""
        assert cd.lambda_k(1) == 2
        assert cd.lambda_k(2) == 4
        assert cd.lambda_k(3) == Fraction(32, 3)

    @pytest.mark.parametrize("k", range(1, 11))
    def test_cycle_orientations(self, k):
        """A k-cycle has 2 C(k, 2i) orientations with i vertices of in-degree 2."""
        tally = cd.a_i_brute(k)
        assert sum(tally.values()) == 2**k
        assert tally == {i: int(cd.a_i(k, i)) for i in range(k // 2 + 1)}

    def test_a_i_range(self):
        """2i may not exceed k."""
        with pytest.raises(DomainError):
            cd.a_i(3, 2)

    def test_mu_small_k(self):
        """mu_1 = 8/5 and mu_2 = 104/25."""
        assert cd.mu_k(1) == Fraction(8, 5)
        assert cd.mu_k(2) == Fraction(104, 25)

    @pytest.mark.parametrize("k", range(1, 21))
    def test_mu_routes_agree(self, k):
        """The orientation sum equals the closed form."""
        assert cd.mu_k_from_orientations(k) == (4**k + Fraction(-4, 5) ** k) / (2 * k)

    @pytest.mark.parametrize("k", range(1, 21))
    def test_delta(self, k):
        """delta_k = (-1/5)^k."""
        assert cd.delta_k(k) == Fraction(-1, 5) ** k

    @pytest.mark.parametrize("k", [1, 4, 7])
    def test_even_part(self, k):
        """The even part of 2(1+x)^k at x = 3/2 is sum_i a_i (9/4)^i."""
        expected = sum(cd.a_i(k, i) * Fraction(9, 4) ** i for i in range(k // 2 + 1))
        assert cd.q_even_part(k, Fraction(3, 2)) == expected

    def test_invalid_k(self):
        """k must be a positive integer."""
        with pytest.raises(DomainError):
            cd.lambda_k(0)


class TestSeries:
    """Tests for exp(sum lambda_k delta_k^2)."""

    def test_first_term(self):
        """lambda_1 delta_1^2 = 2/25."""
        assert cd.ssc_partial_sum(1) == Fraction(2, 25)

    def test_limit(self):
        """The series converges to 5/sqrt(21)."""
        assert cd.ssc_constant(50) == pytest.approx(5 / math.sqrt(21), rel=1e-14)
        assert f"{cd.ssc_constant(50):.9f}" == "1.091089451"

    def test_geometric_convergence(self):
        """The K-th error is below (4/25)^K."""
        for K in (2, 5, 10):
            assert abs(cd.ssc_constant(K) - cd.SSC_LIMIT) < (4 / 25) ** K


class TestJointMomentExact:
    """Tests for the finite-n joint moment E(Y X_k) / E Y."""

    @pytest.mark.parametrize("n", [2, 4, 10, 40])
    def test_loops_constant_in_n(self, n):
        """E(Y X_1) / E Y = 8/5 at every even n."""
        assert cd.joint_moment_exact(n, 1) == Fraction(8, 5)

    @pytest.mark.parametrize("k", [1, 2])
    def test_matches_brute_force(self, k):
        """Enumeration over all n=2 pairings gives the same rational."""
        assert cd.joint_moment_exact(2, k) == cd.joint_moment_brute(2, k)

    def test_tends_to_mu(self):
        """For k=3 the finite-n value approaches mu_3."""
        errors = [abs(float(cd.joint_moment_exact(n, 3) - cd.mu_k(3))) for n in (20, 200, 2000)]
        assert errors[0] > errors[1] > errors[2]
        assert errors[2] < 0.01 * float(cd.mu_k(3))

    def test_cycle_longer_than_n(self):
        """A 3-cycle does not fit on two vertices."""
        with pytest.raises(DomainError):
            cd.joint_moment_exact(2, 3)


class TestMonteCarlo:
    """Tests for Monte Carlo joint moments."""

    def test_within_tolerance(self):
        """Relative tolerance or three standard errors, whichever is larger."""
        estimate = cd.JointMomentEstimate("x", 1.0, 0.01, 100, target=1.05)
        assert estimate.within_tolerance()
        assert not estimate.within_tolerance(2.0)
        with pytest.raises(DomainError):
            cd.JointMomentEstimate("x", 1.0, 0.01, 100).within_tolerance()

    def test_jackknife_constant_ratio(self):
        """A constant ratio has zero jackknife error."""
        weights = np.arange(1, 101, dtype=float)
        estimate, stderr = cd._ratio_with_jackknife(weights, 3 * weights, 10)
        assert estimate == pytest.approx(3.0)
        assert stderr == pytest.approx(0.0, abs=1e-12)

    def test_loops_at_n10(self):
        """E(Y X_1) / E Y is 8/5 exactly at n=10; the estimate agrees."""
        result = cd.mc_joint_moment(10, 2000, 1, seed=21)
        assert result.target == pytest.approx(1.6)
        assert result.stderr > 0
        assert result.within_tolerance()

    def test_deterministic(self):
        """The same seed gives the same estimate."""
        a = cd.mc_factorial_moment_x1(6, 200, seed=4)
        b = cd.mc_factorial_moment_x1(6, 200, seed=4)
        assert (a.estimate, a.stderr) == (b.estimate, b.stderr)
        assert a.target == pytest.approx(64 / 25)

    def test_cap(self):
        """Exact Y per trial is capped in n."""
        with pytest.raises(SizeCapError):
            cd.mc_joint_moment(20, 10, 1, seed=0)

    def test_needs_two_trials(self):
        """A single trial has no error estimate."""
        with pytest.raises(DomainError):
            cd.mc_joint_moment(6, 1, 1, seed=0)


class TestCycleMomentTable:
    """Tests for the constants table."""

    def test_constants_only(self):
        """Without n the table holds the limits only."""
        table = cd.cycle_moment_table(4)
        assert [r.k for r in table.rows] == [1, 2, 3, 4]
        assert table.rows[0].to_dict()["mu_k"] == "8/5"
        assert table.rows[1].to_dict()["delta_k"] == "1/25"
        assert all(r.mu_exact_n is None and r.mc is None for r in table.rows)

    def test_with_exact_n(self):
        """With n the finite-n joint moments are filled in where k <= n."""
        table = cd.cycle_moment_table(3, n=2)
        assert table.rows[0].mu_exact_n == Fraction(8, 5)
        assert table.rows[2].mu_exact_n is None
        rows = table.csv_rows()
        assert len(rows) == 3
        assert len(rows[0]) == len(cd.CycleMomentTable.COLUMNS)
        assert rows[0][4] == "8/5"

    def test_with_monte_carlo(self):
        """Monte Carlo columns appear when trials are requested."""
        table = cd.cycle_moment_table(2, n=6, trials=100, seed=3)
        assert all(r.mc is not None for r in table.rows)
        assert table.to_dict()["trials"] == 100
        assert "mc_estimate" in table.rows[0].to_dict()
