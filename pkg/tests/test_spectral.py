"""Tests for eigenfunctions, matching residuals and overlaps."""

import math

import numpy as np
import pytest

from ptwell.model import TraceStatus, WellSpec
from ptwell.rootfind import ScanConfig, SweepConfig, continue_levels, find_real_roots
from ptwell.spectral import (
    NotARoot,
    OutOfDomain,
    SpecMismatch,
    derivative,
    eigenfunction,
    eigenfunctions,
    evaluate,
    left_pairing,
    matching_residuals,
    nullspace_coefficients,
    overlap_matrix,
    segment_quadrature,
)

XS = np.linspace(0.0, 1.0, 37)


@pytest.fixture
def half_roots(half_well):
    return find_real_roots(half_well, ScanConfig(kappa_max=10.0), max_workers=1)


@pytest.fixture
def double_roots(double_well):
    return find_real_roots(double_well, ScanConfig(kappa_max=10.0), max_workers=1)


class TestSquareWell:
    """Tests for the analytic bare-well states."""

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_rho_alternates(self, pure_well, n):
        """Test rho_n = (-1)^(n+1) for cos/i sin states."""
        psi = eigenfunction(pure_well, n * math.pi / 2, n)

        assert psi.rho == pytest.approx((-1) ** (n + 1), abs=1e-12)
        assert psi.level == n

    def test_not_a_level(self, pure_well):
        """Test that a non-level kappa is refused."""
        with pytest.raises(NotARoot):
            eigenfunction(pure_well, 1.0)


class TestEigenfunction:
    """Tests for eigenfunctions of coupled wells."""

    def test_pt_symmetry(self, half_well, half_roots):
        """Test psi(-x) = conj psi(x) and psi'(-x) = -conj psi'(x)."""
        psi = eigenfunction(half_well, half_roots[0].kappa, 1)

        assert evaluate(psi, -XS) == pytest.approx(np.conj(evaluate(psi, XS)))
        assert derivative(psi, -XS) == pytest.approx(-np.conj(derivative(psi, XS)))

    def test_walls(self, double_well, double_roots):
        """Test that every state vanishes at x = +-1."""
        for psi in eigenfunctions(double_well, double_roots):
            assert abs(evaluate(psi, 1.0)) < 1e-9
            assert abs(evaluate(psi, -1.0)) < 1e-9

    def test_normalized_at_centre(self, half_well, half_roots):
        """Test psi(0) = mu = 1 for the ground state."""
        psi = eigenfunction(half_well, half_roots[0].kappa, 1)

        assert psi.coefficients.mu == 1.0
        assert evaluate(psi, 0.0) == pytest.approx(1.0)

    def test_matching_residuals(self, double_well, double_roots):
        """Test that all conditions hold at +-a on both sides."""
        for psi in eigenfunctions(double_well, double_roots):
            residuals = matching_residuals(psi)
            assert residuals["right"].shape == (4,)
            assert np.max(np.abs(residuals["right"])) < 1e-9
            assert np.max(np.abs(residuals["left"])) < 1e-9

    def test_derivative_jump(self, half_well, half_roots):
        """Test psi'(a+) - psi'(a-) = i xi psi(a) and its mirror with -i xi."""
        psi = eigenfunction(half_well, half_roots[0].kappa, 1)
        eps = 1e-7

        jump = derivative(psi, 0.5 + eps) - derivative(psi, 0.5 - eps)
        mirror = derivative(psi, -0.5 + eps) - derivative(psi, -0.5 - eps)

        assert jump == pytest.approx(3j * evaluate(psi, 0.5), abs=1e-5)
        assert mirror == pytest.approx(-3j * evaluate(psi, -0.5), abs=1e-5)

    def test_rho_signs_below_first_coalescence(self, half_well, half_roots):
        """Test that rho keeps the square-well sign pattern at moderate coupling."""
        rhos = [psi.rho for psi in eigenfunctions(half_well, half_roots[:4])]

        assert [math.copysign(1, r) for r in rhos] == [1, -1, 1, -1]

    def test_left_pairing_is_rho(self, half_well, half_roots):
        """Test that pairing the left state with its own right state gives rho."""
        psi = eigenfunction(half_well, half_roots[2].kappa, 3)

        assert left_pairing(psi, psi) == pytest.approx(psi.rho, rel=1e-10)

    def test_not_a_root(self, half_well):
        """Test that a non-root kappa has no null vector."""
        with pytest.raises(NotARoot):
            nullspace_coefficients(half_well, 1.0)

    def test_out_of_domain(self, half_well, half_roots):
        """Test that sampling outside the well is refused."""
        psi = eigenfunction(half_well, half_roots[0].kappa)

        with pytest.raises(OutOfDomain):
            evaluate(psi, 1.5)


class TestStrengthIndependentRoots:
    """Tests for the kappa = m pi states at a = 1/2, which do not move with xi."""

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_exact_kappa(self, m):
        """Test that the null vector exists at the exact value m pi."""
        spec = WellSpec((0.5,), (1.0,))

        psi = eigenfunction(spec, m * math.pi, 2 * m)

        residuals = matching_residuals(psi)
        assert np.max(np.abs(residuals["right"])) < 1e-9
        assert np.max(np.abs(residuals["left"])) < 1e-9
        assert abs(evaluate(psi, 1.0)) < 1e-9
        assert evaluate(psi, -XS) == pytest.approx(np.conj(evaluate(psi, XS)))

    def test_scanned_roots_far_up(self):
        """Test that every scanned root up to kappa = 80 yields an eigenfunction."""
        spec = WellSpec((0.5,), (3.0,))
        roots = find_real_roots(spec, ScanConfig(kappa_max=80.0), max_workers=1)

        states = eigenfunctions(spec, roots)

        assert len(states) == len(roots)
        assert any(abs(r.kappa - 25 * math.pi) < 1e-9 for r in roots)

    def test_nearby_value_is_refused(self):
        """Test that zeroing round-off rows does not accept a kappa off the root."""
        with pytest.raises(NotARoot):
            nullspace_coefficients(WellSpec((0.5,), (1.0,)), math.pi + 1e-3)


class TestApproachToCoalescence:
    """Tests for rho along a fragile pair before it merges."""

    @pytest.mark.integration
    def test_rho_shrinks_before_merging(self):
        """Test that |rho| of levels 1 and 3 at a = 1/2 falls over the last five real samples."""
        spec = WellSpec((0.5,), (1.0,))
        traces = continue_levels(spec, SweepConfig(0.0, 6.0, 61), levels=[1, 2, 3], quiet=True)

        for trace in (traces[0], traces[2]):
            real = [s for s in trace.samples if s.status is TraceStatus.REAL][-5:]
            rhos = [
                abs(eigenfunction(spec.scaled(s.xi), s.kappa.real, trace.level).rho) for s in real
            ]
            assert trace.merged is not None
            assert all(later < earlier for earlier, later in zip(rhos, rhos[1:]))


class TestOverlaps:
    """Tests for the bilinear overlaps."""

    def test_biorthogonal(self, double_well, double_roots):
        """Test that distinct states have vanishing bilinear overlap."""
        functions = eigenfunctions(double_well, double_roots[:5])
        matrix = overlap_matrix(functions)

        off = matrix - np.diag(np.diag(matrix))
        assert np.max(np.abs(off)) < 1e-9 * np.max(np.abs(matrix))
        assert np.max(np.abs(np.diag(matrix).imag)) < 1e-10

    def test_mixed_wells(self, half_well, double_well, half_roots, double_roots):
        """Test that overlaps of different wells are refused."""
        first = eigenfunction(half_well, half_roots[0].kappa)
        second = eigenfunction(double_well, double_roots[0].kappa)

        with pytest.raises(SpecMismatch):
            left_pairing(first, second)

    def test_segment_quadrature(self, double_well):
        """Test that the segmented rule integrates polynomials exactly."""
        points, weights = segment_quadrature(double_well, nodes=8)

        assert len(points) == 5 * 8
        assert np.sum(weights) == pytest.approx(2.0)
        assert np.sum(weights * points**2) == pytest.approx(2 / 3)
        assert np.all(np.diff(points) > 0)
