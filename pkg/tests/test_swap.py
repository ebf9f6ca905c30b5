"""Tests for SWAP and its group variant."""

import numpy as np
import pytest

from swapreg.design import DesignMatrix, SupportSet, normalize_columns
from swapreg.errors import CombinatorialBlowupError
from swapreg.projection import fit_support
from swapreg.swap import StopReason, SwapOptions, group_swap_count, swap_m_run, swap_run
from swapreg.theory import esd_scan

from tests.oracles import esd_oracle, gaussian_design, improving_swaps, ls_loss, orthonormal_design


@pytest.mark.unit
class TestSwapOptions:
    """Test option validation."""

    def test_defaults(self):
        """The default iteration cap is p·k."""
        assert SwapOptions().iteration_cap(10, 3) == 30
        assert SwapOptions(max_iterations=4).iteration_cap(10, 3) == 4

    @pytest.mark.parametrize(
        "kwargs",
        [{"max_iterations": 0}, {"epsilon_rel": -1.0}, {"m": 0}, {"candidate_limit": 0}, {"n_jobs": 0}],
    )
    def test_invalid(self, kwargs):
        """Out-of-range options raise ValueError."""
        with pytest.raises(ValueError):
            SwapOptions(**kwargs)


@pytest.mark.unit
class TestSwapRun:
    """Test single-swap SWAP semantics."""

    def test_orthonormal_noiseless_recovery(self):
        """From a disjoint start SWAP needs exactly k swaps on an orthonormal design."""
        X = orthonormal_design(20, 8)
        beta = np.zeros(8)
        beta[[0, 1]] = [3.0, 2.0]
        trace = swap_run(X.data @ beta, X, SupportSet((5, 6)))
        assert trace.final == SupportSet((0, 1))
        assert trace.iterations == 2
        assert trace.final_loss == pytest.approx(0.0, abs=1e-10)
        assert trace.converged
        assert trace.stop_reason is StopReason.NO_IMPROVING_SWAP

    def test_already_optimal(self, noisy_instance):
        """Starting at the ESD minimizer gives a one-iterate trace."""
        best = esd_scan(noisy_instance.y, noisy_instance.X, 3).support
        trace = swap_run(noisy_instance.y, noisy_instance.X, best)
        assert trace.iterations == 0
        assert trace.final == best

    def test_full_support_is_trivial(self, rng):
        """k = p leaves nothing to swap."""
        X = gaussian_design(10, 3, seed=8)
        trace = swap_run(rng.standard_normal(10), X, SupportSet((0, 1, 2)))
        assert trace.iterations == 0
        assert trace.converged

    def test_empty_support_is_trivial(self, small_design, rng):
        """k = 0 returns the empty support with loss ‖y‖²."""
        y = rng.standard_normal(small_design.n)
        trace = swap_run(y, small_design, SupportSet())
        assert trace.final == SupportSet()
        assert trace.final_loss == pytest.approx(float(y @ y))

    def test_iteration_cap(self):
        """max_iterations = 1 stops after one swap."""
        X = orthonormal_design(20, 8)
        beta = np.zeros(8)
        beta[[0, 1]] = [3.0, 2.0]
        trace = swap_run(X.data @ beta, X, SupportSet((5, 6)), SwapOptions(max_iterations=1))
        assert trace.iterations == 1
        assert not trace.converged
        assert trace.stop_reason is StopReason.MAX_ITERATIONS

    def test_requires_normalized_design(self, rng):
        """An unnormalized design is rejected."""
        X = DesignMatrix(rng.standard_normal((10, 4)))
        with pytest.raises(ValueError, match="normalized"):
            swap_run(rng.standard_normal(10), X, SupportSet((0,)))

    def test_trace_properties(self, rng):
        """Losses strictly decrease, supports are distinct and the end is swap-optimal."""
        for trial in range(100):
            n = int(rng.integers(8, 25))
            p = int(rng.integers(5, 13))
            k = int(rng.integers(1, 4))
            X = gaussian_design(n, p, seed=2000 + trial)
            y = rng.standard_normal(n)
            start = SupportSet.of(rng.choice(p, size=k, replace=False).tolist())
            trace = swap_run(y, X, start)

            losses = trace.losses
            assert all(b < a for a, b in zip(losses, losses[1:]))
            supports = [it.support for it in trace.iterates]
            assert len(set(s.indices for s in supports)) == len(supports)
            assert improving_swaps(y, X, list(trace.final)) == []
            for it in trace.iterates:
                assert it.loss == pytest.approx(ls_loss(y, X, it.support), rel=1e-8, abs=1e-12)

    def test_output_is_a_fixed_point(self, rng):
        """Restarting from the returned support makes no swaps and returns it unchanged."""
        for trial in range(100):
            n = int(rng.integers(8, 25))
            p = int(rng.integers(5, 13))
            k = int(rng.integers(1, 4))
            X = gaussian_design(n, p, seed=2000 + trial)
            y = rng.standard_normal(n)
            start = SupportSet.of(rng.choice(p, size=k, replace=False).tolist())
            trace = swap_run(y, X, start)

            again = swap_run(y, X, trace.final)
            assert again.iterations == 0
            assert again.final == trace.final
            assert again.stop_reason == StopReason.NO_IMPROVING_SWAP

    def test_never_beats_exhaustive_search(self, rng):
        """SWAP's final loss is never below the ESD loss."""
        for trial in range(100):
            X = gaussian_design(15, int(rng.integers(5, 13)), seed=3000 + trial)
            k = int(rng.integers(1, 4))
            beta = np.zeros(X.p)
            beta[:k] = 1.0
            y = X.data @ beta + 0.5 * rng.standard_normal(15)
            start = SupportSet.of(rng.choice(X.p, size=k, replace=False).tolist())
            trace = swap_run(y, X, start)
            _, best_loss = esd_oracle(y, X, k)
            assert trace.final_loss >= best_loss - 1e-9 * max(best_loss, 1.0)

    def test_thread_count_does_not_change_trace(self, noisy_instance):
        """n_jobs only changes scheduling."""
        start = SupportSet((9, 10, 11))
        one = swap_run(noisy_instance.y, noisy_instance.X, start, SwapOptions(n_jobs=1))
        four = swap_run(noisy_instance.y, noisy_instance.X, start, SwapOptions(n_jobs=4))
        assert [it.support for it in one.iterates] == [it.support for it in four.iterates]
        assert one.losses == four.losses

    def test_candidate_limit_still_descends(self, noisy_instance):
        """Screened candidates still give a monotone trace."""
        trace = swap_run(
            noisy_instance.y, noisy_instance.X, SupportSet((9, 10, 11)), SwapOptions(candidate_limit=2)
        )
        losses = trace.losses
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_swapped_out_and_in_recorded(self):
        """Each committed iterate names the exchanged variables."""
        X = orthonormal_design(20, 8)
        beta = np.zeros(8)
        beta[[0, 1]] = [3.0, 2.0]
        trace = swap_run(X.data @ beta, X, SupportSet((5, 6)))
        first = trace.iterates[1]
        assert first.swapped_in == (0,)
        assert first.swapped_out[0] in (5, 6)


@pytest.mark.unit
class TestSwapMRun:
    """Test group swaps."""

    def test_count(self):
        """Group swap count sums C(s,t)·C(p−s,t)."""
        assert group_swap_count(2, 5, 2) == 2 * 3 + 1 * 3

    def test_m_equal_one_matches_swap_run(self, noisy_instance):
        """m = 1 gives the same trace as plain SWAP, iterate by iterate."""
        y, X = noisy_instance.y, noisy_instance.X
        for start in [(9, 10, 11), (0, 5, 6), (3, 4, 8), (0, 1, 2)]:
            plain = swap_run(y, X, SupportSet(start))
            grouped = swap_m_run(y, X, SupportSet(start), SwapOptions(m=1))
            assert grouped.iterates == plain.iterates
            assert grouped.stop_reason == plain.stop_reason
            assert grouped.converged == plain.converged

    def test_group_swap_escapes_single_swap_minimum(self):
        """A pair swap leaves a support that no single swap can improve."""
        Q = orthonormal_design(8, 4, seed=5).data
        shared = Q[:, 0] + Q[:, 1]
        X = normalize_columns(np.column_stack([
            Q[:, 0], Q[:, 1], shared + 0.5 * Q[:, 2], shared + 0.5 * Q[:, 3],
        ]))
        y = shared
        start = SupportSet((2, 3))
        S_star = SupportSet((0, 1))

        single = swap_run(y, X, start)
        assert single.stop_reason == StopReason.NO_IMPROVING_SWAP
        assert single.iterations == 0
        assert single.final == start
        assert improving_swaps(y, X, [2, 3]) == []

        grouped = swap_m_run(y, X, start, SwapOptions(m=2))
        assert grouped.final == S_star
        assert grouped.final_loss == pytest.approx(0.0, abs=1e-10)
        assert grouped.iterations >= 1

    def test_m_equal_k_reaches_global_minimum(self, noisy_instance):
        """With m = k one iteration reaches the exhaustive minimizer."""
        y, X = noisy_instance.y, noisy_instance.X
        trace = swap_m_run(y, X, SupportSet((9, 10, 11)), SwapOptions(m=3))
        best, best_loss = esd_oracle(y, X, 3)
        assert trace.final.indices == best
        assert trace.final_loss == pytest.approx(best_loss, rel=1e-9)

    def test_m_larger_than_support(self, noisy_instance):
        """m > |S| is rejected."""
        with pytest.raises(ValueError, match="exceeds"):
            swap_m_run(noisy_instance.y, noisy_instance.X, SupportSet((0,)), SwapOptions(m=2))

    def test_blowup_guard(self, rng):
        """Too many group swaps per iteration raise CombinatorialBlowupError."""
        X = gaussian_design(30, 200, seed=9)
        start = SupportSet(tuple(range(10)))
        with pytest.raises(CombinatorialBlowupError):
            swap_m_run(rng.standard_normal(30), X, start, SwapOptions(m=4))

    def test_group_losses_decrease(self, noisy_instance):
        """Every committed group swap lowers the loss."""
        trace = swap_m_run(noisy_instance.y, noisy_instance.X, SupportSet((9, 10, 11)), SwapOptions(m=2))
        losses = trace.losses
        assert all(b < a for a, b in zip(losses, losses[1:]))
        assert trace.final_loss == pytest.approx(
            fit_support(noisy_instance.y, noisy_instance.X, trace.final).loss, rel=1e-10
        )
