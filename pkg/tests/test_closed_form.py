"""Tests for the explicit determinants and the reduced conditions."""

import math

import numpy as np
import pytest

from ptwell.closed_form import (
    BackendUnsupported,
    ConditionKind,
    PoleAtKappa,
    RationalPosition,
    closed_form_det,
    det_L1,
    det_L2,
    det_L2_printed,
    reduced_conditions,
    residual,
)
from ptwell.model import WellSpec

KAPPAS = np.linspace(0.3, 9.7, 41)


class TestDetL1:
    """Tests for the single-pair determinant."""

    def test_zero_coupling_is_square_well(self):
        """Test that xi = 0 leaves -1/2 sin 2k."""
        assert det_L1(KAPPAS, 0.4, 0.0) == pytest.approx(-0.5 * np.sin(2 * KAPPAS))

    def test_even_in_coupling(self):
        """Test that the sign of xi does not matter."""
        assert det_L1(KAPPAS, 0.4, 2.5) == pytest.approx(det_L1(KAPPAS, 0.4, -2.5))

    def test_half_position_factorizes(self):
        """Test det_L1 at a = 1/2 against -sin k [cos k + xi^2 (1 - cos k)/(4k^2)]."""
        xi = 3.0
        expected = -np.sin(KAPPAS) * (np.cos(KAPPAS) + xi**2 * (1 - np.cos(KAPPAS)) / (4 * KAPPAS**2))

        assert det_L1(KAPPAS, 0.5, xi) == pytest.approx(expected, abs=1e-12)

    def test_complex_kappa(self):
        """Test that complex kappa is accepted and conjugation symmetric."""
        kappa = 2.0 + 0.3j

        assert det_L1(np.conj(kappa), 0.5, 3.0) == pytest.approx(np.conj(det_L1(kappa, 0.5, 3.0)))


class TestDetL2:
    """Tests for the two-pair determinant."""

    def test_outer_coupling_off(self):
        """Test that xi2 = 0 reduces to the inner pair alone."""
        assert det_L2(KAPPAS, 0.3, 0.7, 2.0, 0.0) == pytest.approx(det_L1(KAPPAS, 0.3, 2.0))

    def test_inner_coupling_off(self):
        """Test that xi1 = 0 reduces to the outer pair alone."""
        assert det_L2(KAPPAS, 0.3, 0.7, 0.0, 2.0) == pytest.approx(det_L1(KAPPAS, 0.7, 2.0))

    def test_inner_pair_at_origin(self):
        """Test that a -> 0 removes the inner pair."""
        near = det_L2(KAPPAS, 1e-12, 0.7, 4.0, 2.0)

        assert near == pytest.approx(det_L1(KAPPAS, 0.7, 2.0), abs=1e-9)

    def test_coinciding_pairs_merge(self):
        """Test that a = b adds the couplings."""
        merged = det_L2(KAPPAS, 0.6, 0.6, 1.25, 0.75)

        assert merged == pytest.approx(det_L1(KAPPAS, 0.6, 2.0), abs=1e-12)

    def test_printed_variant_differs(self):
        """Test that the variant without sin 2ka in the quartic term is a different function."""
        exact = det_L2(KAPPAS, 0.3, 0.7, 3.0, 3.0)
        printed = det_L2_printed(KAPPAS, 0.3, 0.7, 3.0, 3.0)

        assert np.max(np.abs(exact - printed)) > 1e-3

    def test_printed_variant_fails_origin_limit(self):
        """Test that only the corrected form survives a -> 0."""
        printed = det_L2_printed(KAPPAS, 1e-12, 0.7, 4.0, 2.0)

        assert np.max(np.abs(printed - det_L1(KAPPAS, 0.7, 2.0))) > 1e-3


class TestClosedFormDet:
    """Tests for closed_form_det dispatch."""

    def test_dispatch(self, pure_well, half_well, double_well):
        """Test that each L picks its formula."""
        kappa = 1.7

        assert closed_form_det(pure_well, kappa) == pytest.approx(-0.5 * math.sin(3.4))
        assert closed_form_det(half_well, kappa) == pytest.approx(det_L1(kappa, 0.5, 3.0))
        assert closed_form_det(double_well, kappa) == pytest.approx(
            det_L2(kappa, 0.3, 0.7, 1.5, 2.5)
        )

    def test_three_pairs_unsupported(self, triple_well):
        """Test that L = 3 has no closed form."""
        with pytest.raises(BackendUnsupported) as exc_info:
            closed_form_det(triple_well, 1.0)

        assert exc_info.value.exit_code == 3


class TestRationalPosition:
    """Tests for RationalPosition."""

    def test_from_position(self):
        """Test lookup by value."""
        assert RationalPosition.from_position(0.5) is RationalPosition.HALF
        assert RationalPosition.from_position(2 / 3) is RationalPosition.TWO_THIRDS
        assert RationalPosition.from_position(0.3) is None


class TestReducedConditions:
    """Tests for the factorized conditions."""

    @pytest.mark.parametrize("a_tag", list(RationalPosition))
    @pytest.mark.parametrize("xi", [0.0, 1.0, 3.0, 5.0, 10.0])
    def test_roots_are_determinant_roots(self, a_tag, xi):
        """Test that every factor root is a root of det_L1."""
        for condition in reduced_conditions(a_tag, xi):
            for kappa in condition.roots(20.0):
                value = det_L1(kappa, a_tag.position, xi)
                assert abs(value) < 1e-8 * (1 + xi**2), (condition.description, kappa)

    @pytest.mark.parametrize(
        "a_tag, spacing",
        [
            (RationalPosition.HALF, math.pi),
            (RationalPosition.THIRD, 1.5 * math.pi),
            (RationalPosition.TWO_THIRDS, 1.5 * math.pi),
            (RationalPosition.QUARTER, 2 * math.pi),
        ],
    )
    def test_exact_roots(self, a_tag, spacing):
        """Test the xi-independent root ladders."""
        exact = reduced_conditions(a_tag, 7.0)[1]

        assert exact.kind is ConditionKind.EXACT_ROOTS
        assert exact.spacing == pytest.approx(spacing)
        assert exact.roots(20.0) == pytest.approx([m * spacing for m in range(1, int(20 / spacing) + 1)])

    def test_half_condition_value(self):
        """Test the a = 1/2 factor (xi^2 - 4k^2) cos k - xi^2."""
        condition = reduced_conditions(RationalPosition.HALF, 3.0)[0]
        kappa = 1.3

        assert condition.value(kappa) == pytest.approx((9 - 4 * kappa**2) * math.cos(kappa) - 9)

    def test_two_thirds_is_quadratic(self):
        """Test the quadratic coefficients at a = 2/3."""
        condition = reduced_conditions(RationalPosition.TWO_THIRDS, 2.0)[0]

        assert condition.kind is ConditionKind.QUADRATIC_IN_X
        assert condition.quadratic_coefficients(1.5) == pytest.approx((5.0, 4.0, -2.25))

    def test_quadratic_coefficients_only_for_quadratic(self):
        """Test that other kinds refuse quadratic_coefficients."""
        with pytest.raises(ValueError):
            reduced_conditions(RationalPosition.HALF, 2.0)[0].quadratic_coefficients(1.0)

    def test_residual_rejects_zero(self):
        """Test that kappa = 0 is a pole of every rearranged form."""
        condition = reduced_conditions(RationalPosition.THIRD, 2.0)[0]

        with pytest.raises(PoleAtKappa):
            residual(condition, 0.0)

    def test_residual_at_exact_root(self):
        """Test that exact roots have vanishing residual."""
        exact = reduced_conditions(RationalPosition.HALF, 2.0)[1]

        assert residual(exact, math.pi) < 1e-15
