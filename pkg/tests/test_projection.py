"""Tests for least-squares fits and incremental QR updates."""

import numpy as np
import pytest

from swapreg.design import SupportSet, normalize_columns
from swapreg.errors import NonFiniteError, RankDeficientError
from swapreg.projection import (
    REBUILD_EVERY,
    add_column,
    apply_swap,
    candidate_losses,
    constrained_ls,
    fit_support,
    remove_column,
    swap_loss,
)

from tests.oracles import gaussian_design, ls_loss


@pytest.mark.unit
class TestFitSupport:
    """Test fresh factorizations."""

    def test_empty_support_loss_is_norm(self, small_design, rng):
        """L(∅) = ‖y‖²."""
        y = rng.standard_normal(small_design.n)
        assert fit_support(y, small_design, SupportSet()).loss == pytest.approx(float(y @ y))

    def test_matches_pseudo_inverse(self, rng):
        """Loss agrees with the explicit projector."""
        X = gaussian_design(8, 3, seed=2)
        y = rng.standard_normal(8)
        S = SupportSet((0, 2))
        assert fit_support(y, X, S).loss == pytest.approx(ls_loss(y, X, S), rel=1e-9)

    def test_full_rank_square_support_has_zero_loss(self, rng):
        """With |S| = n the response is interpolated."""
        X = gaussian_design(4, 6, seed=3)
        y = rng.standard_normal(4)
        assert fit_support(y, X, SupportSet((0, 1, 2, 3))).loss == pytest.approx(0.0, abs=1e-10)

    def test_too_many_columns(self, rng):
        """|S| > n is rank deficient."""
        X = gaussian_design(3, 6, seed=4)
        with pytest.raises(RankDeficientError):
            fit_support(rng.standard_normal(3), X, SupportSet((0, 1, 2, 3)))

    def test_duplicate_columns(self, rng):
        """Identical columns make the support rank deficient."""
        base = rng.standard_normal((10, 2))
        X = normalize_columns(np.column_stack([base, base[:, 0]]))
        with pytest.raises(RankDeficientError):
            fit_support(rng.standard_normal(10), X, SupportSet((0, 2)))

    def test_non_finite_response(self, small_design):
        """NaN in y raises NonFiniteError."""
        y = np.zeros(small_design.n)
        y[0] = np.nan
        with pytest.raises(NonFiniteError):
            fit_support(y, small_design, SupportSet((0,)))

    def test_residual_orthogonal_to_support(self, small_design, rng):
        """The residual is orthogonal to every selected column."""
        y = rng.standard_normal(small_design.n)
        S = SupportSet((1, 4, 6))
        beta = constrained_ls(y, small_design, S)
        residual = y - small_design.data @ beta.values
        for j in S:
            column = small_design.data[:, j]
            assert abs(column @ residual) <= 1e-8 * np.linalg.norm(y) * np.linalg.norm(column)


@pytest.mark.unit
class TestIncrementalUpdates:
    """Test remove/add/swap against fresh fits."""

    def test_remove_column(self, small_design, rng):
        """Downdating matches a fresh fit of the smaller support."""
        y = rng.standard_normal(small_design.n)
        fit = fit_support(y, small_design, SupportSet((0, 3, 5)))
        reduced = remove_column(fit, 3, y)
        assert reduced.support == SupportSet((0, 5))
        assert reduced.loss == pytest.approx(fit_support(y, small_design, reduced.support).loss, rel=1e-10)

    def test_add_column(self, small_design, rng):
        """Appending matches a fresh fit of the larger support."""
        y = rng.standard_normal(small_design.n)
        fit = add_column(fit_support(y, small_design, SupportSet((2,))), 7, small_design)
        assert fit.support == SupportSet((2, 7))
        assert fit.loss == pytest.approx(ls_loss(y, small_design, [2, 7]), rel=1e-10)

    def test_add_dependent_column(self, rng):
        """A column already in the span is rejected."""
        base = rng.standard_normal((10, 2))
        X = normalize_columns(np.column_stack([base, base[:, 0] + base[:, 1]]))
        fit = fit_support(rng.standard_normal(10), X, SupportSet((0, 1)))
        with pytest.raises(RankDeficientError):
            add_column(fit, 2, X)
        assert np.isinf(candidate_losses(fit, [2], X)[0])

    def test_swap_loss_matches_refit(self, rng):
        """swap_loss equals a fresh fit on many random instances."""
        for trial in range(200):
            n = int(rng.integers(10, 41))
            p = int(rng.integers(4, 61))
            k = int(rng.integers(1, min(8, p - 1, n) + 1))
            X = gaussian_design(n, p, seed=1000 + trial)
            y = rng.standard_normal(n)
            S = SupportSet.of(rng.choice(p, size=k, replace=False).tolist())
            fit = fit_support(y, X, S)
            i = int(rng.choice(list(S)))
            j = int(rng.choice(S.complement(p)))
            expected = fit_support(y, X, S.swap(i, j)).loss
            assert swap_loss(fit, i, j, y, X) == pytest.approx(expected, rel=1e-8, abs=1e-12)

    def test_swap_loss_rejects_member(self, small_design, rng):
        """The incoming variable must be outside the support."""
        y = rng.standard_normal(small_design.n)
        fit = fit_support(y, small_design, SupportSet((0, 1)))
        with pytest.raises(ValueError, match="already in the support"):
            swap_loss(fit, 0, 1, y, small_design)

    def test_chained_swaps_stay_accurate(self, rng):
        """Twenty chained swaps agree with a fresh factorization."""
        X = gaussian_design(30, 8, seed=11)
        y = rng.standard_normal(30)
        fit = fit_support(y, X, SupportSet((0, 1, 2)))
        for _ in range(20):
            i = int(rng.choice(list(fit.support)))
            j = int(rng.choice(fit.support.complement(X.p)))
            fit = apply_swap(fit, i, j, y, X)
        assert fit.loss == pytest.approx(fit_support(y, X, fit.support).loss, rel=1e-7)
        assert fit.orthogonality_error() < 1e-8

    def test_rebuild_after_many_swaps(self, rng):
        """The swap counter resets after a refactorization."""
        X = gaussian_design(20, 6, seed=12)
        y = rng.standard_normal(20)
        fit = fit_support(y, X, SupportSet((0, 1)))
        for step in range(REBUILD_EVERY):
            out = fit.support.indices[step % 2]
            into = int(fit.support.complement(X.p)[0])
            fit = apply_swap(fit, out, into, y, X)
        assert fit.swaps_since_rebuild == 0
        assert fit.order == fit.support.indices


@pytest.mark.unit
class TestConstrainedLs:
    """Test restricted least squares."""

    def test_exact_recovery_noiseless(self):
        """Noiseless data on S gives back the true coefficients."""
        X = gaussian_design(25, 6, seed=5)
        beta = np.array([0.0, 1.5, 0.0, -2.0, 0.0, 0.0])
        coef = constrained_ls(X.data @ beta, X, SupportSet((1, 3)))
        np.testing.assert_allclose(coef.values, beta, atol=1e-10)

    def test_coefficients_follow_support_order(self, rng):
        """Coefficients stay aligned after swaps reorder the factorization."""
        X = gaussian_design(25, 6, seed=6)
        y = rng.standard_normal(25)
        fit = apply_swap(fit_support(y, X, SupportSet((0, 4))), 0, 2, y, X)
        expected = constrained_ls(y, X, SupportSet((2, 4))).values[[2, 4]]
        np.testing.assert_allclose(fit.coefficients(), expected, atol=1e-10)
