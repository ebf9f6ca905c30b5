"""Tests for design matrices, supports and coefficient vectors."""

import numpy as np
import pytest

from swapreg.design import CoefficientVector, DesignMatrix, SupportSet, normalize_columns
from swapreg.errors import NonFiniteError, SwapRegError, ZeroColumnError


@pytest.mark.unit
class TestNormalizeColumns:
    """Test column normalization."""

    def test_columns_have_unit_scaled_norm(self, rng):
        """Every column ends with ‖X_i‖²/n = 1."""
        X = normalize_columns(rng.standard_normal((6, 3)) * [1.0, 50.0, 0.01])
        scaled = np.sum(X.data ** 2, axis=0) / X.n
        np.testing.assert_allclose(scaled, 1.0, atol=1e-12)
        assert X.normalized

    def test_zero_column_is_reported(self):
        """The first zero column is named in the error."""
        data = np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
        with pytest.raises(ZeroColumnError) as exc:
            normalize_columns(data)
        assert exc.value.column == 1

    def test_non_finite_rejected(self):
        """NaN entries raise NonFiniteError."""
        with pytest.raises(NonFiniteError):
            normalize_columns(np.array([[1.0, np.nan], [2.0, 3.0]]))

    def test_errors_are_value_errors(self):
        """Library errors can be caught as ValueError."""
        with pytest.raises(ValueError):
            normalize_columns(np.zeros((3, 2)))
        assert issubclass(ZeroColumnError, SwapRegError)


@pytest.mark.unit
class TestDesignMatrix:
    """Test DesignMatrix invariants."""

    def test_data_is_read_only(self, small_design):
        """The stored array cannot be modified in place."""
        with pytest.raises(ValueError):
            small_design.data[0, 0] = 1.0

    def test_normalized_flag_is_checked(self):
        """A matrix flagged normalized must actually be."""
        with pytest.raises(ValueError, match="flagged normalized"):
            DesignMatrix(np.ones((4, 2)) * 2.0, normalized=True)

    def test_gram(self, small_design):
        """gram() is XᵀX/n with a unit diagonal for normalized X."""
        gram = small_design.gram()
        np.testing.assert_allclose(np.diag(gram), 1.0, atol=1e-12)
        np.testing.assert_allclose(gram, gram.T)


@pytest.mark.unit
class TestSupportSet:
    """Test SupportSet construction and helpers."""

    def test_of_sorts(self):
        """Indices in any order become a sorted support."""
        assert SupportSet.of([4, 1, 3]).indices == (1, 3, 4)

    def test_duplicates_rejected(self):
        """Duplicate indices raise ValueError."""
        with pytest.raises(ValueError, match="Duplicate"):
            SupportSet.of([1, 1])

    def test_unsorted_constructor_rejected(self):
        """The raw constructor requires strictly increasing indices."""
        with pytest.raises(ValueError, match="strictly increasing"):
            SupportSet((3, 1))

    def test_validate_range(self):
        """Indices must be below p."""
        with pytest.raises(ValueError, match="out of range"):
            SupportSet((0, 5)).validate(5)

    def test_swap(self):
        """swap replaces one index and keeps the order."""
        assert SupportSet((1, 4, 7)).swap(4, 0) == SupportSet((0, 1, 7))
        with pytest.raises(ValueError):
            SupportSet((1, 4)).swap(2, 5)
        with pytest.raises(ValueError):
            SupportSet((1, 4)).swap(1, 4)

    def test_complement(self):
        """complement lists the outside indices in ascending order."""
        np.testing.assert_array_equal(SupportSet((1, 3)).complement(5), [0, 2, 4])


@pytest.mark.unit
class TestCoefficientVector:
    """Test CoefficientVector."""

    def test_from_support(self):
        """Coefficients are scattered into their support positions."""
        beta = CoefficientVector.from_support(5, SupportSet((1, 3)), np.array([2.0, -1.0]))
        np.testing.assert_array_equal(beta.values, [0.0, 2.0, 0.0, -1.0, 0.0])
        assert beta.p == 5

    def test_nonzero_outside_support_rejected(self):
        """Values off the support must be zero."""
        with pytest.raises(ValueError, match="outside its support"):
            CoefficientVector(np.array([1.0, 1.0]), SupportSet((0,)))
