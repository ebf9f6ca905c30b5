"""Tests for FoBa, OMP and CoSaMP."""

import numpy as np
import pytest
import scipy.linalg

from solvers.greedy import CosampSolver, FobaSolver, _merge_candidates, cosamp, foba, omp
from swapreg.design import SupportSet, normalize_columns

from tests.oracles import gaussian_design, orthonormal_design


def decoy_design():
    """Columns e1, e2, (e1 + e2 + e3/2)/1.5, e4, e5 in a scaled orthonormal basis.

    y = e1 + 0.9 e2 correlates most with the third column, so pure forward
    selection keeps it, while a backward step can drop it.
    """
    Q = orthonormal_design(10, 5, seed=3).data
    decoy = (Q[:, 0] + Q[:, 1] + 0.5 * Q[:, 2]) / 1.5
    X = normalize_columns(np.column_stack([Q[:, 0], Q[:, 1], decoy, Q[:, 3], Q[:, 4]]))
    return X, Q[:, 0] + 0.9 * Q[:, 1]


@pytest.mark.unit
class TestPursuits:
    """Behavior shared by every greedy pursuit."""

    @pytest.mark.parametrize("select", [omp, foba, cosamp])
    def test_orthonormal_noiseless_recovery(self, select):
        """Test that every pursuit recovers S* when columns are orthogonal."""
        X = orthonormal_design(20, 8)
        beta = np.zeros(8)
        beta[[1, 4, 6]] = [2.0, -1.5, 1.0]
        assert select(X.data @ beta, X, 3).support == SupportSet((1, 4, 6))

    @pytest.mark.parametrize("select", [omp, foba, cosamp])
    def test_k_zero(self, select, small_design, rng):
        """Test that k = 0 returns the empty support."""
        assert select(rng.standard_normal(small_design.n), small_design, 0).support == SupportSet()

    def test_solver_classes(self, noisy_instance):
        """Test that solver parameters reach the algorithms."""
        inst = noisy_instance
        assert FobaSolver({"nu": 0.0}).select(inst.y, inst.X, 3, 0).support == omp(inst.y, inst.X, 3).support
        with pytest.raises(ValueError):
            CosampSolver({"max_iter": 0}).validate_config()


@pytest.mark.unit
class TestFoba:
    """Test the adaptive forward-backward greedy."""

    def test_backward_step_removes_decoy(self):
        """Test that FoBa drops the decoy column that OMP keeps."""
        X, y = decoy_design()
        forward_only = omp(y, X, 2)
        adaptive = foba(y, X, 2, nu=0.5)
        assert forward_only.support == SupportSet((0, 2))
        assert adaptive.support == SupportSet((0, 1))
        assert adaptive.metadata["backward_steps"] >= 1
        assert adaptive.metadata["loss"] == pytest.approx(0.0, abs=1e-10)
        assert forward_only.metadata["backward_steps"] == 0

    def test_omp_is_foba_without_backward_steps(self, noisy_instance):
        """Test that nu = 0 gives exactly OMP."""
        inst = noisy_instance
        assert foba(inst.y, inst.X, 3, nu=0.0).support == omp(inst.y, inst.X, 3).support

    def test_k_equals_min_dimension(self):
        """Test that k = min(n, p) disables the lookahead and still returns k indices."""
        X = gaussian_design(6, 10, seed=2)
        y = np.random.default_rng(0).standard_normal(6)
        assert len(foba(y, X, 6).support) == 6

    def test_rejects_bad_nu(self, small_design):
        """Test that nu outside [0, 1) is rejected."""
        with pytest.raises(ValueError, match="nu"):
            foba(np.ones(small_design.n), small_design, 2, nu=1.0)

    def test_rejects_k_above_n(self):
        """Test that k > min(n, p) is rejected."""
        X = gaussian_design(4, 10, seed=1)
        with pytest.raises(ValueError):
            foba(np.ones(4), X, 5)


@pytest.mark.unit
class TestCosamp:
    """Test compressive sampling matching pursuit."""

    def test_needs_enough_samples(self):
        """Test that CoSaMP refuses 2k > n."""
        X = gaussian_design(5, 10, seed=1)
        with pytest.raises(ValueError, match="2k <= n"):
            cosamp(np.ones(5), X, 3)

    def test_metadata(self, noisy_instance):
        """Test that CoSaMP reports its iteration count and convergence."""
        inst = noisy_instance
        selection = cosamp(inst.y, inst.X, 3)
        assert 1 <= selection.metadata["iterations"] <= 100
        assert selection.metadata["converged"]
        assert selection.metadata["capped_merges"] == 0

    def test_merge_never_exceeds_sample_count(self, mocker):
        """Test that every least-squares fit uses at most n columns when 3k > n."""
        n, p, k = 6, 30, 3
        lstsq = mocker.spy(scipy.linalg, "lstsq")
        capped = 0
        for trial in range(20):
            X = gaussian_design(n, p, seed=300 + trial)
            y = np.random.default_rng(trial).standard_normal(n)
            selection = cosamp(y, X, k)
            assert len(selection.support) == k
            capped += selection.metadata["capped_merges"]
        assert lstsq.call_count > 0
        assert all(call.args[0].shape[1] <= n for call in lstsq.call_args_list)
        assert capped > 0

    def test_capped_merge_keeps_current_support(self):
        """Test that a capped merge keeps the support and fills by score, ties to smaller index."""
        scores = np.array([0.0, 5.0, 4.0, 4.0, 1.0, 3.0])
        merged, capped = _merge_candidates(scores, SupportSet((0, 4)), 4, 4)
        assert capped
        np.testing.assert_array_equal(merged, [0, 1, 2, 4])
        merged, capped = _merge_candidates(scores, SupportSet((1,)), 2, 4)
        assert not capped
        np.testing.assert_array_equal(merged, [1, 2])
