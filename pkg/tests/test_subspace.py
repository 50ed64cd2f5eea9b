import numpy as np
import pytest

from compressed_pca.errors import NumericError, ValidationError
from compressed_pca.model import make_spiked
from compressed_pca.projection import ProjectionMatrix, generate
from compressed_pca.subspace import (
    CompressedCovariance,
    check_psd,
    eigendecompose,
    eigenvalue_inflation_check,
    exact_compressed_covariance,
    predicted_inflation,
    sample_compressed_covariance,
)

# 50 * (1 + 20/49) evaluated at 40 digits
INFLATED_TOP_SPIKE = 70.40816326530612244897959183673469387755


def extraction(l, p):
    return ProjectionMatrix.from_entries(np.sqrt(p) * np.eye(l, p))


class TestExactCovariance:
    def test_pure_noise_reduces_to_gram(self):
        phi = generate(30, 7, seed=1)
        model = make_spiked(30, [])
        cov = exact_compressed_covariance(model, phi)
        np.testing.assert_allclose(cov.matrix, phi.entries.T @ phi.entries / 7, rtol=1e-14)

    def test_extraction_gives_leading_block(self):
        cov = exact_compressed_covariance(make_spiked(10, [6.0, 3.0]), extraction(10, 4))
        np.testing.assert_allclose(cov.matrix, np.diag([6.0, 3.0, 1.0, 1.0]), atol=1e-14)

    def test_scalar_hand_arithmetic(self):
        a, b = 0.7, -1.3
        phi = ProjectionMatrix.from_entries([[a], [b]])
        cov = exact_compressed_covariance(make_spiked(2, [2.0]), phi)
        assert cov.matrix[0, 0] == pytest.approx(2 * a * a + b * b, rel=1e-15)

    @pytest.mark.parametrize("l,p", [(8, 3), (40, 10), (64, 16)])
    def test_structured_equals_dense(self, l, p, rng):
        basis, _ = np.linalg.qr(rng.standard_normal((l, 3)))
        model = make_spiked(l, [9.0, 4.0, 2.0], basis=basis)
        phi = generate(l, p, seed=l)
        dense = phi.entries.T @ model.covariance() @ phi.entries / p
        assert np.max(np.abs(exact_compressed_covariance(model, phi).matrix - dense)) < 1e-10

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            exact_compressed_covariance(make_spiked(10, [2.0]), generate(11, 3, 0))

    def test_symmetrized(self):
        cov = CompressedCovariance(np.array([[1.0, 2.0], [0.0, 1.0]]))
        assert np.array_equal(cov.matrix, cov.matrix.T)


class TestSampleCovariance:
    def test_two_point(self):
        y = np.array([1.0, -2.0, 0.5])
        cov = sample_compressed_covariance(np.vstack([y, -y]))
        np.testing.assert_allclose(cov.matrix, np.outer(y, y), rtol=1e-15)
        assert cov.source == "sample" and cov.n == 2

    def test_identical_rows(self):
        assert np.all(sample_compressed_covariance(np.ones((5, 3))).matrix == 0)

    def test_needs_two_rows(self):
        with pytest.raises(ValidationError):
            sample_compressed_covariance(np.ones((1, 3)))

    def test_wishart_band(self, rng):
        n = 100_000
        target = np.diag([3.0, 1.0])
        y = rng.standard_normal((n, 2)) * np.sqrt([3.0, 1.0])
        est = sample_compressed_covariance(y).matrix
        se = np.sqrt((target**2 + np.outer(np.diag(target), np.diag(target))) / n)
        assert np.all(np.abs(est - target) < 5 * se)


class TestEigendecompose:
    def test_diagonal(self):
        sub = eigendecompose(CompressedCovariance(np.diag([5.0, 2.0, 1.0])), 1)
        np.testing.assert_array_equal(sub.eigenvalues, [5.0, 2.0, 1.0])
        np.testing.assert_array_equal(sub.basis_k[:, 0], [1.0, 0.0, 0.0])
        assert sub.tail_sum == 3.0 and sub.tail_sq_sum == 5.0

    def test_indefinite_two_by_two(self):
        sub = eigendecompose(CompressedCovariance(np.array([[0.0, 1.0], [1.0, 0.0]])), 1)
        np.testing.assert_allclose(sub.eigenvalues, [1.0, -1.0], atol=1e-15)
        np.testing.assert_allclose(sub.basis_k[:, 0], [2**-0.5, 2**-0.5], atol=1e-15)

    def test_psd_guard_is_separate(self):
        with pytest.raises(NumericError):
            check_psd(CompressedCovariance(np.array([[0.0, 1.0], [1.0, 0.0]])))
        assert check_psd(CompressedCovariance(np.diag([2.0, 0.0]))) == 0.0

    @pytest.mark.parametrize("k", [0, 3, 4])
    def test_k_range(self, k):
        with pytest.raises(ValidationError):
            eigendecompose(CompressedCovariance(np.eye(3)), k)

    def test_non_finite_input_is_numeric_failure(self):
        a = np.eye(3)
        a[0, 0] = np.nan
        with pytest.raises(NumericError, match="non-finite"):
            eigendecompose(CompressedCovariance(a), 1)

    def test_sign_convention(self):
        a = np.array([[2.0, -1.0], [-1.0, 2.0]])
        sub = eigendecompose(CompressedCovariance(a), 1, keep_vectors=True)
        for col in sub.vectors.T:
            i = np.argmax(np.abs(col))
            assert col[i] > 0

    def test_invariants_and_reconstruction(self, rng):
        g = rng.standard_normal((60, 40))
        cov = CompressedCovariance(g.T @ g / 60)
        sub = eigendecompose(cov, 5, keep_vectors=True)
        assert np.all(np.diff(sub.eigenvalues) <= 0)
        np.testing.assert_allclose(sub.basis_k.T @ sub.basis_k, np.eye(5), atol=1e-10)
        assert sub.tail_sum == pytest.approx(np.trace(cov.matrix) - sub.eigenvalues[:5].sum(), rel=1e-8)
        recon = sub.vectors @ np.diag(sub.eigenvalues) @ sub.vectors.T
        assert np.linalg.norm(recon - cov.matrix) <= 1e-8 * np.linalg.norm(cov.matrix)

    def test_residual_projector(self, rng):
        g = rng.standard_normal((50, 30))
        sub = eigendecompose(CompressedCovariance(g.T @ g / 50), 4)
        m = sub.residual_projector()
        assert np.max(np.abs(m - m.T)) < 1e-10
        assert np.max(np.abs(m @ m - m)) < 1e-10
        assert abs(np.trace(m) - 26) < 1e-8

    def test_partial_matches_full(self, rng):
        g = rng.standard_normal((400, 200))
        cov = CompressedCovariance(g.T @ g / 400 + np.diag(np.linspace(10, 0, 200)))
        full = eigendecompose(cov, 6, method="full")
        part = eigendecompose(cov, 6, method="partial")
        np.testing.assert_allclose(part.eigenvalues, full.eigenvalues[:6], rtol=1e-10)
        np.testing.assert_allclose(part.basis_k, full.basis_k, atol=1e-8)
        assert part.tail_sum == pytest.approx(full.tail_sum, rel=1e-10)
        assert part.tail_sq_sum == pytest.approx(full.tail_sq_sum, rel=1e-10)

    def test_unknown_method(self):
        with pytest.raises(ValidationError):
            eigendecompose(CompressedCovariance(np.eye(3)), 1, method="qr")


class TestInflation:
    def test_top_spike_formula(self):
        assert predicted_inflation(50.0, 20.0) == pytest.approx(INFLATED_TOP_SPIKE, rel=1e-15)

    def test_no_compression(self):
        assert predicted_inflation(7.0, 0.0) == 7.0

    def test_condition_boundary_names_spike(self):
        model = make_spiked(200, [50.0, 10.0])
        sub = eigendecompose(CompressedCovariance(np.diag(np.linspace(60, 1, 20))), 2)
        with pytest.raises(ValidationError, match="sigma=10.0"):
            eigenvalue_inflation_check(model, sub, 100.0)

    def test_full_scale_band(self, reference_model):
        phi = generate(10000, 500, seed=7)
        sub = eigendecompose(exact_compressed_covariance(reference_model, phi), 6, method="partial")
        assert sub.eigenvalues[0] == pytest.approx(INFLATED_TOP_SPIKE, abs=5 * 50 * np.sqrt(2 * (1 - 20 / 49**2) / 500))
        rows = eigenvalue_inflation_check(reference_model, sub, 20.0)
        assert len(rows) == 5
        assert all(abs(r.z_score) < 5 for r in rows)

    def test_trace_fluctuation_is_bounded(self, reference_model):
        # sample SD over 30 projections; oracle run gave about 9
        gaps = []
        for s in range(30):
            phi = generate(10000, 500, seed=1000 + s)
            gaps.append(np.trace(exact_compressed_covariance(reference_model, phi).matrix) - reference_model.trace)
        assert np.std(gaps, ddof=1) < 50
