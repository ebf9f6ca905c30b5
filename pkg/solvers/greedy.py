"""Greedy pursuit solvers: FoBa, OMP and CoSaMP."""

import logging
from typing import Any, Dict, Optional, Tuple

import numpy as np
import scipy.linalg

from swapreg.design import DesignMatrix, SupportSet
from swapreg.errors import RankDeficientError
from swapreg.projection import ActiveFit, add_column, check_response, fit_support, remove_column

from .base import Selection, SupportSolver
from .utils import check_sparsity, top_k

logger = logging.getLogger(__name__)

# Forward gains at or below this fraction of ‖y‖² count as no progress.
GAIN_TOL = 1e-12


def _forward(fit: ActiveFit, X: DesignMatrix) -> Optional[ActiveFit]:
    """Add the outside variable most correlated with the residual."""
    outside = fit.support.complement(X.p)
    if outside.size == 0:
        return None
    scores = np.abs(X.data[:, outside].T @ fit.residual)
    for position in np.argsort(-scores, kind="stable"):
        try:
            return add_column(fit, int(outside[position]), X)
        except RankDeficientError:
            continue
    return None


def _least_damaging(fit: ActiveFit, y) -> Tuple[float, int, ActiveFit]:
    """The removal that raises the loss least, ties to the smallest index."""
    best = None
    for i in fit.support:
        reduced = remove_column(fit, i, y)
        rise = reduced.loss - fit.loss
        if best is None or rise < best[0]:
            best = (rise, i, reduced)
    return best


def foba(y, X: DesignMatrix, k: int, nu: float = 0.5, max_steps: Optional[int] = None) -> Selection:
    """Adaptive forward-backward greedy selection of k variables.

    Forward steps add argmax |X_jᵀ residual|. After each forward step,
    variables are removed while the cheapest removal raises the loss by less
    than nu times the forward gain recorded at that size. Once |S| = k, one
    more forward step is tried; the loop continues only if that step admits a
    backward removal of a different variable, otherwise the size-k support is
    returned. nu = 0 is plain orthogonal matching pursuit.

    Args:
        y: Response vector
        X: Normalized design matrix
        k: Target size, k <= min(n, p)
        nu: Backward threshold in [0, 1)
        max_steps: Cap on forward steps (default 10·(p + k))

    Returns:
        Selection with metadata forward_steps, backward_steps and loss
    """
    y = check_response(y, X)
    check_sparsity(k, min(X.n, X.p), "min(n, p)")
    if not 0 <= nu < 1:
        raise ValueError(f"nu must lie in [0, 1), got {nu}")
    max_steps = max_steps or 10 * (X.p + k)

    fit = fit_support(y, X, SupportSet())
    gains: Dict[int, float] = {}
    forward_steps = backward_steps = 0
    lookahead = nu > 0 and k < min(X.n, X.p)

    while forward_steps < max_steps:
        size = len(fit.support)
        if size == k and not lookahead:
            break
        grown = _forward(fit, X)
        if grown is None:
            break
        gain = fit.loss - grown.loss
        if size == k and gain <= GAIN_TOL * fit.y_norm_sq:
            break

        previous = fit
        added = next(j for j in grown.support if j not in fit.support)
        fit = grown
        forward_steps += 1
        gains[len(fit.support)] = gain

        while len(fit.support) > 1:
            rise, i, reduced = _least_damaging(fit, y)
            if not rise < nu * gains[len(fit.support)]:
                break
            if len(fit.support) > k and i == added:
                break
            logger.debug("FoBa backward step removes %d (rise %.4g)", i, rise)
            fit = reduced
            backward_steps += 1

        if len(fit.support) > k:
            fit = previous
            break

    while len(fit.support) > k:
        fit = _least_damaging(fit, y)[2]
    return Selection(
        fit.support,
        {"forward_steps": forward_steps, "backward_steps": backward_steps, "loss": fit.loss},
    )


def omp(y, X: DesignMatrix, k: int) -> Selection:
    """Orthogonal matching pursuit (forward-only FoBa)."""
    return foba(y, X, k, nu=0.0)


def cosamp(y, X: DesignMatrix, k: int, max_iter: int = 100) -> Selection:
    """Compressive sampling matching pursuit.

    Each iteration merges the 2k variables most correlated with the residual
    into the current support, solves least squares on the merge and prunes to
    the k largest coefficients. Stops when the support repeats, the residual
    vanishes or max_iter is reached.

    The merged set never exceeds n columns: when it would, the current
    support is kept and only the best-scoring new columns fill the remaining
    n - |support| slots. The number of capped merges is reported in the
    metadata.

    Raises:
        ValueError: If 2k > n
    """
    y = check_response(y, X)
    check_sparsity(k, X.p)
    if 2 * k > X.n:
        raise ValueError(f"CoSaMP needs 2k <= n, got k = {k}, n = {X.n}")
    if k == 0:
        return Selection(SupportSet(), {"iterations": 0, "converged": True, "capped_merges": 0})

    support = SupportSet()
    residual = y.copy()
    y_norm = float(np.linalg.norm(y))
    converged = False
    iterations = 0
    capped_merges = 0
    for iterations in range(1, max_iter + 1):
        merged, capped = _merge_candidates(np.abs(X.data.T @ residual), support, min(2 * k, X.p), X.n)
        capped_merges += capped
        b, *_ = scipy.linalg.lstsq(X.data[:, merged], y)
        keep = top_k(np.abs(b), k).as_array()
        candidate = SupportSet.of(merged[keep].tolist())
        residual = y - X.data[:, merged[keep]] @ b[keep]

        if candidate == support:
            converged = True
            break
        support = candidate
        if np.linalg.norm(residual) <= 1e-12 * max(y_norm, 1e-300):
            converged = True
            break

    return Selection(
        support,
        {"iterations": iterations, "converged": converged, "capped_merges": capped_merges},
    )


def _merge_candidates(scores: np.ndarray, support: SupportSet, width: int, limit: int):
    """Union of the support and the top `width` scores, at most `limit` columns.

    Returns the sorted merged indices and whether the cap was applied.
    """
    proxy = top_k(scores, width)
    merged = set(proxy) | set(support)
    if len(merged) <= limit:
        return np.array(sorted(merged), dtype=np.intp), False
    order = np.argsort(-scores, kind="stable")
    fresh = [j for j in order[:width].tolist() if j not in support]
    kept = set(support) | set(fresh[: limit - len(support)])
    return np.array(sorted(kept), dtype=np.intp), True


class FobaSolver(SupportSolver):
    """Adaptive forward-backward greedy."""

    name = "foba"
    defaults: Dict[str, Any] = {"nu": 0.5}

    def validate_config(self) -> None:
        self._check_keys(self.defaults)
        if not 0 <= float(self.config["nu"]) < 1:
            raise ValueError("nu must lie in [0, 1)")

    def select(self, y, X: DesignMatrix, k: int, seed: int) -> Selection:
        return foba(y, X, k, nu=float(self.config["nu"]))


class OmpSolver(SupportSolver):
    """Orthogonal matching pursuit."""

    name = "omp"

    def validate_config(self) -> None:
        self._check_keys(())

    def select(self, y, X: DesignMatrix, k: int, seed: int) -> Selection:
        return omp(y, X, k)


class CosampSolver(SupportSolver):
    """Compressive sampling matching pursuit."""

    name = "cosamp"
    defaults: Dict[str, Any] = {"max_iter": 100}

    def validate_config(self) -> None:
        self._check_keys(self.defaults)
        if int(self.config["max_iter"]) < 1:
            raise ValueError("max_iter must be >= 1")

    def select(self, y, X: DesignMatrix, k: int, seed: int) -> Selection:
        return cosamp(y, X, k, max_iter=int(self.config["max_iter"]))
