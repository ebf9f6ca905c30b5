"""SWAP: greedy variable swapping for size-k least-squares supports.

Each iteration scores every single swap (i out, i' in) of the current support
and commits the best one when it strictly lowers the loss. The group variant
``swap_m_run`` scores all swaps of up to m variables at once.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg
from joblib import Parallel, delayed
from scipy.special import comb

from .design import DesignMatrix, SupportSet
from .errors import CombinatorialBlowupError
from .projection import (
    RANK_TOL,
    ActiveFit,
    apply_swap,
    candidate_losses,
    check_response,
    fit_support,
    remove_column,
)

logger = logging.getLogger(__name__)

# Upper bound on group swaps scored per iteration by swap_m_run.
GROUP_SWAP_LIMIT = 1e7


class StopReason(str, Enum):
    NO_IMPROVING_SWAP = "NoImprovingSwap"
    MAX_ITERATIONS = "MaxIterations"


@dataclass(frozen=True)
class SwapOptions:
    """Settings for swap_run / swap_m_run.

    Attributes:
        max_iterations: Cap on committed swaps (None means p·k)
        epsilon_rel: Relative strict-decrease threshold
        m: Largest group swap size
        candidate_limit: Keep only this many incoming candidates per outgoing
            variable, ranked by |X_jᵀ residual| (None keeps all)
        n_jobs: Threads used to score candidates
    """

    max_iterations: Optional[int] = None
    epsilon_rel: float = 1e-12
    m: int = 1
    candidate_limit: Optional[int] = None
    n_jobs: int = 1

    def __post_init__(self):
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.epsilon_rel < 0:
            raise ValueError(f"epsilon_rel must be >= 0, got {self.epsilon_rel}")
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.candidate_limit is not None and self.candidate_limit < 1:
            raise ValueError(f"candidate_limit must be >= 1, got {self.candidate_limit}")
        if self.n_jobs == 0:
            raise ValueError("n_jobs must be nonzero")

    def iteration_cap(self, p: int, k: int) -> int:
        if self.max_iterations is not None:
            return self.max_iterations
        return max(1, p * k)


@dataclass(frozen=True)
class SwapIterate:
    support: SupportSet
    loss: float
    swapped_out: Tuple[int, ...] = ()
    swapped_in: Tuple[int, ...] = ()


@dataclass(frozen=True)
class SwapTrace:
    """Iterates S(1) -> ... -> S(r) of one SWAP run."""

    iterates: Tuple[SwapIterate, ...]
    converged: bool
    stop_reason: StopReason

    @property
    def final(self) -> SupportSet:
        return self.iterates[-1].support

    @property
    def final_loss(self) -> float:
        return self.iterates[-1].loss

    @property
    def iterations(self) -> int:
        """Number of committed swaps."""
        return len(self.iterates) - 1

    @property
    def losses(self) -> List[float]:
        return [it.loss for it in self.iterates]


def _accepts(new_loss: float, current: float, epsilon_rel: float) -> bool:
    return new_loss < current - epsilon_rel * max(current, 1e-300)


def _limit_candidates(reduced: ActiveFit, outside: np.ndarray, X: DesignMatrix,
                      limit: Optional[int]) -> np.ndarray:
    if limit is None or limit >= outside.size:
        return outside
    scores = np.abs(X.data[:, outside].T @ reduced.residual)
    keep = np.argsort(-scores, kind="stable")[:limit]
    return np.sort(outside[keep])


def _best_for_outgoing(fit: ActiveFit, i: int, outside: np.ndarray, y, X: DesignMatrix,
                       limit: Optional[int]) -> Tuple[float, int, int]:
    """Best (loss, i, i') with i fixed; ties go to the smallest i'."""
    reduced = remove_column(fit, i, y)
    candidates = _limit_candidates(reduced, outside, X, limit)
    losses = candidate_losses(reduced, candidates, X)
    j = int(np.argmin(losses))
    return float(losses[j]), int(i), int(candidates[j])


def _check_inputs(y, X: DesignMatrix, S_init: SupportSet) -> np.ndarray:
    y = check_response(y, X)
    S_init.validate(X.p)
    if not X.normalized:
        raise ValueError("SWAP expects a design with normalized columns")
    return y


def swap_run(y, X: DesignMatrix, S_init: SupportSet, opts: Optional[SwapOptions] = None) -> SwapTrace:
    """Run single-variable SWAP from ``S_init``.

    Args:
        y: Response vector
        X: Normalized design matrix
        S_init: Initial support, |S_init| <= n
        opts: Options (defaults to SwapOptions())

    Returns:
        SwapTrace whose final support admits no strictly improving single swap
        (unless the iteration cap was hit)

    Raises:
        RankDeficientError: If S_init is an invalid support
    """
    opts = opts or SwapOptions()
    y = _check_inputs(y, X, S_init)
    fit = fit_support(y, X, S_init)
    cap = opts.iteration_cap(X.p, len(S_init))
    iterates = [SwapIterate(fit.support, fit.loss)]

    if len(S_init) == 0 or len(S_init) == X.p:
        return SwapTrace(tuple(iterates), True, StopReason.NO_IMPROVING_SWAP)

    with Parallel(n_jobs=opts.n_jobs, prefer="threads") as parallel:
        for step in range(cap):
            outside = fit.support.complement(X.p)
            scored = parallel(
                delayed(_best_for_outgoing)(fit, i, outside, y, X, opts.candidate_limit)
                for i in fit.support
            )
            best_loss, i, i_new = min(scored)

            if not (np.isfinite(best_loss) and _accepts(best_loss, fit.loss, opts.epsilon_rel)):
                logger.debug("No improving swap from %s (loss %.6g)", fit.support, fit.loss)
                return SwapTrace(tuple(iterates), True, StopReason.NO_IMPROVING_SWAP)

            swapped = apply_swap(fit, i, i_new, y, X)
            if not _accepts(swapped.loss, fit.loss, opts.epsilon_rel):
                return SwapTrace(tuple(iterates), True, StopReason.NO_IMPROVING_SWAP)

            logger.debug(
                "Swap %d: %d -> %d, loss %.6g -> %.6g", step + 1, i, i_new, fit.loss, swapped.loss
            )
            fit = swapped
            iterates.append(SwapIterate(fit.support, fit.loss, (i,), (i_new,)))

    logger.info("SWAP stopped at the iteration cap (%d)", cap)
    return SwapTrace(tuple(iterates), False, StopReason.MAX_ITERATIONS)


def group_swap_count(s: int, p: int, m: int) -> int:
    """Number of group swaps of size 1..m from a size-s support."""
    return int(sum(comb(s, t, exact=True) * comb(p - s, t, exact=True) for t in range(1, m + 1)))


def _best_for_outgoing_group(support: SupportSet, out: Tuple[int, ...], y, X: DesignMatrix,
                             t: int) -> Tuple[float, int, Tuple[int, ...], Tuple[int, ...]]:
    """Best group swap that removes ``out`` and adds t outside variables."""
    kept = SupportSet(tuple(j for j in support if j not in out))
    reduced = fit_support(y, X, kept)
    outside = support.complement(X.p)

    if t == 1:
        losses = candidate_losses(reduced, outside, X)
        j = int(np.argmin(losses))
        return float(losses[j]), t, out, (int(outside[j]),)

    cols = X.data[:, outside]
    if reduced.q.shape[1]:
        cols = cols - reduced.q @ (reduced.q.T @ cols)
    best = (np.inf, t, out, tuple(int(j) for j in outside[:t]))
    floor = RANK_TOL * np.sqrt(X.n)
    for positions in combinations(range(outside.size), t):
        q, r = scipy.linalg.qr(cols[:, positions], mode="economic")
        if np.min(np.abs(np.diag(r))) < floor:
            continue
        resid = reduced.residual - q @ (q.T @ reduced.residual)
        loss = float(min(resid @ resid, reduced.y_norm_sq))
        candidate = (loss, t, out, tuple(int(outside[c]) for c in positions))
        if candidate < best:
            best = candidate
    return best


def swap_m_run(y, X: DesignMatrix, S_init: SupportSet, opts: SwapOptions) -> SwapTrace:
    """Run SWAP with group swaps of up to ``opts.m`` variables.

    m = 1 is exactly :func:`swap_run`. Ties are broken by (loss, group size,
    outgoing tuple, incoming tuple).

    Raises:
        ValueError: If m exceeds |S_init|
        CombinatorialBlowupError: If a single iteration would score more than 1e7 group swaps
    """
    if opts.m == 1:
        return swap_run(y, X, S_init, opts)

    y = _check_inputs(y, X, S_init)
    s, p = len(S_init), X.p
    if opts.m > s:
        raise ValueError(f"Group size m = {opts.m} exceeds the support size {s}")
    sizes = [t for t in range(1, opts.m + 1) if t <= p - s]
    count = group_swap_count(s, p, min(opts.m, p - s))
    if count > GROUP_SWAP_LIMIT:
        raise CombinatorialBlowupError(f"group swaps of size <= {opts.m}", count, GROUP_SWAP_LIMIT)

    fit = fit_support(y, X, S_init)
    cap = opts.iteration_cap(p, s)
    iterates = [SwapIterate(fit.support, fit.loss)]
    if not sizes:
        return SwapTrace(tuple(iterates), True, StopReason.NO_IMPROVING_SWAP)

    with Parallel(n_jobs=opts.n_jobs, prefer="threads") as parallel:
        for step in range(cap):
            jobs = [
                delayed(_best_for_outgoing_group)(fit.support, out, y, X, t)
                for t in sizes
                for out in combinations(fit.support.indices, t)
            ]
            best_loss, t, out, into = min(parallel(jobs))

            if not (np.isfinite(best_loss) and _accepts(best_loss, fit.loss, opts.epsilon_rel)):
                return SwapTrace(tuple(iterates), True, StopReason.NO_IMPROVING_SWAP)

            support = SupportSet.of([j for j in fit.support if j not in out] + list(into))
            swapped = fit_support(y, X, support)
            if not _accepts(swapped.loss, fit.loss, opts.epsilon_rel):
                return SwapTrace(tuple(iterates), True, StopReason.NO_IMPROVING_SWAP)

            logger.debug("Group swap %d: %s -> %s, loss %.6g", step + 1, out, into, swapped.loss)
            fit = swapped
            iterates.append(SwapIterate(fit.support, fit.loss, out, into))

    return SwapTrace(tuple(iterates), False, StopReason.MAX_ITERATIONS)
