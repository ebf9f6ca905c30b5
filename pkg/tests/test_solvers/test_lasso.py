"""Tests for the Lasso path, CV Lasso and thresholded Lasso."""

import numpy as np
import pytest

from solvers.lasso import LassoSolver, lambda_grid, lasso_cv, lasso_path, support_at_sparsity, tlasso
from swapreg.design import SupportSet
from swapreg.errors import TooFewSamplesError
from swapreg.swap import swap_run

from tests.oracles import gaussian_design, orthonormal_design


def soft_threshold(z, lam):
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


@pytest.mark.unit
class TestLassoPath:
    """Test the coordinate-descent Lasso path."""

    def test_grid_starts_at_lambda_max(self, small_design, rng):
        """Test that the grid is log-spaced down from ‖Xᵀy‖∞/n."""
        y = rng.standard_normal(small_design.n)
        grid = lambda_grid(y, small_design, 10, 1e-2)
        assert grid[0] == pytest.approx(np.max(np.abs(small_design.data.T @ y)) / small_design.n)
        assert grid[-1] == pytest.approx(grid[0] * 1e-2)
        assert np.all(np.diff(grid) < 0)

    def test_kkt_conditions(self, small_design, rng):
        """Test that each path solution satisfies the Lasso optimality conditions."""
        y = small_design.data @ np.array([1.5, 0, 0, -1.0, 0, 0, 0.5, 0]) + 0.3 * rng.standard_normal(small_design.n)
        path = lasso_path(y, small_design, n_lambdas=20)
        for j, lam in enumerate(path.lambdas):
            beta = path.coefficients[:, j]
            grad = small_design.data.T @ (y - small_design.data @ beta) / small_design.n
            assert np.all(np.abs(grad) <= lam + 1e-6)
            active = beta != 0
            np.testing.assert_allclose(grad[active], lam * np.sign(beta[active]), atol=1e-6)

    def test_orthonormal_soft_threshold(self, rng):
        """Test that an orthonormal design gives soft-thresholded correlations."""
        X = orthonormal_design(20, 6)
        y = rng.standard_normal(20)
        z = X.data.T @ y / X.n
        path = lasso_path(y, X, n_lambdas=15)
        for j, lam in enumerate(path.lambdas):
            np.testing.assert_allclose(path.coefficients[:, j], soft_threshold(z, lam), atol=1e-8)

    def test_zero_above_lambda_max(self, small_design, rng):
        """Test that penalties at or above λ_max select nothing."""
        y = rng.standard_normal(small_design.n)
        lam_max = lambda_grid(y, small_design)[0]
        path = lasso_path(y, small_design, lambdas=[2 * lam_max, 1.0001 * lam_max])
        assert all(len(s) == 0 for s in path.supports)

    def test_invalid_grid(self, small_design, rng):
        """Test that increasing or nonpositive grids are rejected."""
        y = rng.standard_normal(small_design.n)
        with pytest.raises(ValueError, match="decreasing"):
            lasso_path(y, small_design, lambdas=[0.1, 0.2])
        with pytest.raises(ValueError, match="positive"):
            lasso_path(y, small_design, lambdas=[0.1, 0.0])


@pytest.mark.unit
class TestLassoCV:
    """Test the cross-validated Lasso."""

    def test_is_deterministic(self, noisy_instance):
        """Test that the same seed gives the same λ and coefficients."""
        inst = noisy_instance
        lam1, beta1 = lasso_cv(inst.y, inst.X, folds=4, seed=3)
        lam2, beta2 = lasso_cv(inst.y, inst.X, folds=4, seed=3)
        assert lam1 == lam2
        np.testing.assert_array_equal(beta1.values, beta2.values)

    def test_too_few_samples(self, rng):
        """Test that n < folds raises TooFewSamplesError."""
        X = gaussian_design(4, 6, seed=1)
        with pytest.raises(TooFewSamplesError):
            lasso_cv(rng.standard_normal(4), X, folds=5)


@pytest.mark.unit
class TestSparsitySelection:
    """Test thresholded Lasso and the Lasso-at-k support."""

    def test_tlasso_degenerate_flag(self, small_design):
        """Test that too few nonzeros are filled by index and flagged."""
        selection = tlasso(np.zeros(small_design.n), small_design, 3)
        assert selection.support == SupportSet((0, 1, 2))
        assert selection.metadata["degenerate"]
        assert selection.metadata["nonzeros"] == 0

    def test_support_at_sparsity_padding(self):
        """Test that a path that never reaches k is padded by residual correlation."""
        X = orthonormal_design(20, 6)
        y = X.data @ np.array([3.0, 2.0, 1.0, 0.0, 0.0, 0.0])
        path = lasso_path(y, X, lambdas=[2.5, 2.2])
        selection = support_at_sparsity(path, 3, y, X)
        assert selection.support == SupportSet((0, 1, 2))
        assert selection.metadata["padded"] == 2
        assert selection.metadata["lambda"] == 2.5

    def test_support_at_sparsity_takes_first_reaching_lambda(self):
        """Test that the largest λ with at least k actives is used."""
        X = orthonormal_design(20, 6)
        y = X.data @ np.array([3.0, 2.0, 1.0, 0.5, 0.0, 0.0])
        selection = LassoSolver({}).select(y, X, 2, seed=0)
        assert selection.support == SupportSet((0, 1))
        assert selection.metadata["padded"] == 0

    def test_swap_repairs_lasso_on_bordered_design(self, bordered_fixture):
        """Test that SWAP recovers S* where the Lasso keeps the bordering column."""
        X, y, _, S_star = bordered_fixture
        selection = LassoSolver({}).select(y, X, 4, seed=0)
        assert 11 in selection.support
        assert selection.support != S_star
        assert swap_run(y, X, selection.support).final == S_star
