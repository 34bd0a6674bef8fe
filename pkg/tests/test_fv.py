"""Tests for the two-component representation and the metric family."""

import math

import numpy as np
import pytest

from ptwell.fv import (
    DegenerateRoot,
    MetricSpec,
    NonPositiveWeight,
    WeightScheme,
    build_eigenpairs,
    build_metric,
    diagnose,
    identity_defect,
    metric_coefficients,
    physical_product,
    product_gram,
    quasi_hermiticity_residual,
    random_span_vectors,
    segmented_grid,
    square_well_trial,
    truncate,
    uniform_grid,
)
from ptwell.model import RootRecord, WellSpec
from ptwell.rootfind import ScanConfig, find_real_roots


@pytest.fixture
def square_roots():
    return [RootRecord(n, n * math.pi / 2, 0.0) for n in range(1, 7)]


@pytest.fixture
def half_pairs(half_well):
    roots = find_real_roots(half_well, ScanConfig(kappa_max=12.0), max_workers=1)[:6]
    return build_eigenpairs(half_well, roots, segmented_grid(half_well, 512), quiet=True)


class TestGrids:
    """Tests for the carrier grids."""

    def test_uniform_weights(self):
        """Test interior points with equal trapezoid weights."""
        grid = uniform_grid(128)

        assert grid.size == 127
        assert np.all(grid.weights == 2.0 / 128)
        assert grid.kind == "uniform"

    def test_minimum_size(self, half_well):
        """Test that tiny grids are refused."""
        with pytest.raises(ValueError):
            uniform_grid(16)
        with pytest.raises(ValueError):
            segmented_grid(half_well, 32)

    def test_segmented_weights(self, double_well):
        """Test that the segmented rule covers the whole well."""
        grid = segmented_grid(double_well, 256)

        assert np.sum(grid.weights) == pytest.approx(2.0)
        assert grid.kind == "segmented"


class TestEigenpairs:
    """Tests for build_eigenpairs."""

    def test_both_signs(self, pure_well, square_roots):
        """Test that every level contributes tau = +1 and tau = -1."""
        pairs = build_eigenpairs(pure_well, square_roots, segmented_grid(pure_well, 256))

        assert len(pairs) == 12
        assert [p.sign for p in pairs[:2]] == [1, -1]
        assert pairs[1].energy == pytest.approx(-math.pi / 2)

    def test_mu_matches_rho(self, half_pairs):
        """Test mu = 2 tau kappa rho on the grid."""
        for pair in half_pairs:
            assert pair.mu == pytest.approx(pair.mu_expected, rel=1e-9)

    def test_vector_shapes(self, half_pairs):
        """Test the (2, P) layout with the energy in the upper component."""
        pair = half_pairs[0]

        assert pair.right.shape == (2, pair.grid.size)
        assert pair.right[0] == pytest.approx(pair.kappa * pair.right[1])
        assert pair.left[1] == pytest.approx(pair.kappa * pair.left[0])

    def test_too_few_levels(self, half_well):
        """Test that an empty root list fails with the degeneracy exit code."""
        with pytest.raises(DegenerateRoot) as exc_info:
            build_eigenpairs(half_well, [], min_levels=1)

        assert exc_info.value.exit_code == 4

    def test_truncate(self, half_pairs):
        """Test that truncation keeps the lowest levels with both signs."""
        kept = truncate(half_pairs, 2)

        assert sorted({p.level for p in kept}) == [1, 2]
        assert len(kept) == 4


class TestMetric:
    """Tests for the metric family."""

    @pytest.mark.parametrize("scheme", [WeightScheme.UNIT, WeightScheme.INVERSE_MU_SQUARED])
    def test_inverse_on_right_span(self, half_pairs, scheme):
        """Test Theta^-1 Theta = 1 on every right eigenvector."""
        metric = build_metric(half_pairs, MetricSpec.for_pairs(half_pairs, scheme))

        for pair in half_pairs:
            back = metric.theta_inverse.apply(metric.theta.apply(pair.right))
            assert np.max(np.abs(back - pair.right)) < 1e-8 * np.max(np.abs(pair.right))

    def test_quasi_hermiticity(self, half_pairs):
        """Test Theta H = H^dagger Theta on random span vectors."""
        metric = build_metric(half_pairs, MetricSpec.for_pairs(half_pairs))

        for vector in random_span_vectors(half_pairs, 5, seed=7):
            assert quasi_hermiticity_residual(half_pairs, metric, vector) < 1e-8

    def test_positive_product(self, half_pairs):
        """Test that the physical product is positive on the span."""
        metric = build_metric(half_pairs, MetricSpec.for_pairs(half_pairs, WeightScheme.UNIT))
        gram = product_gram(metric, [p.right for p in half_pairs])

        assert np.linalg.eigvalsh(gram).min() > 0

    def test_product_is_hermitian(self, half_pairs):
        """Test <u|Theta v> = conj <v|Theta u>."""
        metric = build_metric(half_pairs, MetricSpec.for_pairs(half_pairs))
        first, second = random_span_vectors(half_pairs, 2, seed=3)

        assert physical_product(metric, first, second) == pytest.approx(
            np.conj(physical_product(metric, second, first)), rel=1e-9
        )

    def test_coefficients_are_weights(self, half_pairs):
        """Test that Theta is diagonal in the eigenbasis with entries omega."""
        mspec = MetricSpec.for_pairs(half_pairs, WeightScheme.UNIT)
        metric = build_metric(half_pairs, mspec)

        coefficients = metric_coefficients(metric)

        assert coefficients == pytest.approx(np.eye(len(half_pairs)), abs=1e-8)

    def test_dense_matches_apply(self, half_pairs):
        """Test the dense matrix against the low-rank application."""
        metric = build_metric(truncate(half_pairs, 2), MetricSpec.for_pairs(half_pairs, truncation=2))
        vector = random_span_vectors(half_pairs, 1, seed=11)[0]

        dense = metric.theta.dense() @ vector.reshape(-1)

        assert dense == pytest.approx(metric.theta.apply(vector).reshape(-1))

    def test_scaled_metric(self, half_pairs):
        """Test that a rescaled weight set still satisfies the inverse relation."""
        mspec = MetricSpec.for_pairs(half_pairs, WeightScheme.UNIT).scaled(3.0)
        metric = build_metric(half_pairs, mspec)
        pair = half_pairs[3]

        back = metric.theta_inverse.apply(metric.theta.apply(pair.right))
        assert mspec.scheme is WeightScheme.CUSTOM
        assert np.max(np.abs(back - pair.right)) < 1e-8 * np.max(np.abs(pair.right))

    def test_non_positive_weight(self):
        """Test that zero or negative weights are refused."""
        with pytest.raises(NonPositiveWeight):
            MetricSpec(2, (1.0, 0.0), (1.0, 1.0), WeightScheme.CUSTOM)
        with pytest.raises(NonPositiveWeight):
            MetricSpec(1, (1.0,), (-2.0,), WeightScheme.CUSTOM)

    def test_custom_scheme_needs_weights(self, half_pairs):
        """Test that for_pairs does not invent custom weights."""
        with pytest.raises(ValueError):
            MetricSpec.for_pairs(half_pairs, WeightScheme.CUSTOM)


class TestCompleteness:
    """Tests for the truncated resolution of the identity."""

    def test_square_well_mode_is_reproduced(self, pure_well, square_roots):
        """Test that the ground mode lies in the span of the bare-well vectors."""
        grid = segmented_grid(pure_well, 256)
        pairs = build_eigenpairs(pure_well, square_roots, grid)

        assert identity_defect(pairs, square_well_trial(grid, 1)) < 1e-10


class TestDiagnose:
    """Tests for diagnose."""

    def test_report(self, half_well):
        """Test the full diagnostics on a coupled well."""
        roots = find_real_roots(half_well, ScanConfig(kappa_max=12.0), max_workers=1)

        report = diagnose(half_well, roots, truncation=4, grid=segmented_grid(half_well, 512))
        data = report.to_dict()

        assert data["levels"] == [1, 2, 3, 4]
        assert data["truncation"] == 4
        assert data["scheme"] == "inv-mu2"
        assert data["min_eigenvalue_of_product_gram"] > 0
        assert data["quasi_hermiticity_residual_max"] < 1e-8
        assert data["mu_mismatch_max"] < 1e-6
        assert len(data["mu"]) == 8
        assert len(data["identity_defects"]) == 2

    def test_needs_two_levels(self, half_well):
        """Test that a single level cannot carry a metric diagnosis."""
        roots = find_real_roots(half_well, ScanConfig(kappa_max=2.0), max_workers=1)[:1]

        with pytest.raises(DegenerateRoot):
            diagnose(half_well, roots, quiet=True)


class TestHalfPositionWeakCoupling:
    """Tests at a = 1/2, xi = 1, where half of the levels sit at kappa = m pi."""

    @pytest.fixture
    def spec(self):
        return WellSpec((0.5,), (1.0,))

    @pytest.fixture
    def roots(self, spec):
        return find_real_roots(spec, ScanConfig(kappa_max=30.0), max_workers=1)[:16]

    def test_report_with_eight_levels(self, spec, roots):
        """Test the diagnostics over eight levels including the m pi states."""
        report = diagnose(spec, roots, truncation=8, grid=segmented_grid(spec, 1024), quiet=True)

        assert report.levels == list(range(1, 9))
        assert report.min_eigenvalue_of_product_gram > 0
        assert report.quasi_hermiticity_residual_max < 1e-8

    def test_mu_matches_two_kappa_rho(self, spec, roots):
        """Test mu = +-2 kappa rho from the grid pairing."""
        pairs = build_eigenpairs(spec, roots[:8], segmented_grid(spec, 1024), quiet=True)

        for pair in pairs:
            assert abs(pair.mu) == pytest.approx(2 * pair.kappa * abs(pair.rho), rel=1e-9)

    def test_identity_defect_decreases(self, spec, roots):
        """Test that the bare ground mode is reproduced better with more levels."""
        grid = segmented_grid(spec, 1024)
        pairs = build_eigenpairs(spec, roots, grid, quiet=True)
        trial = square_well_trial(grid, 1)

        defects = [identity_defect(truncate(pairs, n), trial) for n in (4, 8, 16)]

        assert defects[0] > defects[1] > defects[2]

    def test_random_weights_keep_product_positive(self, spec, roots):
        """Test positivity of the physical product for random positive weights."""
        pairs = build_eigenpairs(spec, roots[:6], segmented_grid(spec, 512), quiet=True)
        rng = np.random.default_rng(20240501)

        for _ in range(5):
            weights = rng.uniform(0.1, 10.0, size=(2, 6))
            mspec = MetricSpec(6, tuple(weights[0]), tuple(weights[1]), WeightScheme.CUSTOM)
            gram = product_gram(build_metric(pairs, mspec), [p.right for p in pairs])

            assert np.linalg.eigvalsh(gram).min() > 0
