"""Lasso path, cross-validated Lasso and Lasso-derived size-k supports."""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from sklearn.linear_model import lasso_path as _sklearn_lasso_path

from swapreg.design import CoefficientVector, DesignMatrix, SupportSet
from swapreg.errors import TooFewSamplesError
from swapreg.projection import check_response

from .base import Selection, SupportSolver
from .utils import check_sparsity, top_k

logger = logging.getLogger(__name__)

GRID_SIZE = 100
GRID_RATIO = 1e-3
CD_TOL = 1e-10
CD_MAX_ITER = 100_000


@dataclass(frozen=True, eq=False)
class LassoPath:
    """Lasso solutions along a decreasing λ grid.

    Attributes:
        lambdas: Strictly decreasing positive penalties
        coefficients: p×len(lambdas) array, column j solves the problem at lambdas[j]
        supports: Nonzero pattern of each column
    """

    lambdas: np.ndarray
    coefficients: np.ndarray
    supports: Tuple[SupportSet, ...]

    def coefficient_vector(self, index: int) -> CoefficientVector:
        return CoefficientVector(self.coefficients[:, index], self.supports[index])


def lambda_grid(y: np.ndarray, X: DesignMatrix, n_lambdas: int = GRID_SIZE,
                ratio: float = GRID_RATIO) -> np.ndarray:
    """Log-spaced grid from λ_max = ‖Xᵀy‖_∞/n down to ratio·λ_max."""
    lam_max = float(np.max(np.abs(X.data.T @ y))) / X.n
    if lam_max == 0.0:
        lam_max = 1.0
    return np.geomspace(lam_max, lam_max * ratio, n_lambdas)


def _path_coefficients(data: np.ndarray, y: np.ndarray, lambdas: np.ndarray) -> np.ndarray:
    if not np.any(y):
        return np.zeros((data.shape[1], lambdas.size))
    _, coefs, _ = _sklearn_lasso_path(
        np.asfortranarray(data), y, alphas=lambdas, tol=CD_TOL, max_iter=CD_MAX_ITER
    )
    return coefs


def lasso_path(y, X: DesignMatrix, lambdas: Optional[Sequence[float]] = None,
               n_lambdas: int = GRID_SIZE) -> LassoPath:
    """Coordinate-descent solutions of (1/2n)‖y − Xβ‖² + λ‖β‖₁ along a grid.

    Args:
        y: Response vector
        X: Normalized design matrix
        lambdas: Strictly decreasing positive grid (default: :func:`lambda_grid`)
        n_lambdas: Size of the default grid

    Raises:
        NonFiniteError: If y contains NaN or Inf
        ValueError: If the grid is not strictly decreasing and positive
    """
    y = check_response(y, X)
    if lambdas is None:
        lambdas = lambda_grid(y, X, n_lambdas)
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if lambdas.ndim != 1 or lambdas.size == 0 or np.any(lambdas <= 0):
        raise ValueError("lambdas must be a nonempty vector of positive values")
    if np.any(np.diff(lambdas) >= 0):
        raise ValueError("lambdas must be strictly decreasing")

    coefs = _path_coefficients(X.data, y, lambdas)
    supports = tuple(SupportSet(tuple(np.flatnonzero(coefs[:, j]).tolist())) for j in range(lambdas.size))
    return LassoPath(lambdas, coefs, supports)


def lasso_cv(y, X: DesignMatrix, folds: int = 5, n_lambdas: int = GRID_SIZE,
             seed: int = 0) -> Tuple[float, CoefficientVector]:
    """Pick λ by K-fold cross-validation and refit on all rows.

    Folds are contiguous blocks of a seeded row permutation. Ties in the mean
    validation error go to the larger λ.

    Raises:
        TooFewSamplesError: If n < folds
    """
    y = check_response(y, X)
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    if X.n < folds:
        raise TooFewSamplesError(f"{X.n} samples cannot be split into {folds} folds")

    grid = lambda_grid(y, X, n_lambdas)
    permutation = np.random.default_rng(seed).permutation(X.n)
    errors = np.zeros(grid.size)
    for held_out in np.array_split(permutation, folds):
        train = np.setdiff1d(permutation, held_out)
        coefs = _path_coefficients(X.data[train], y[train], grid)
        predictions = X.data[held_out] @ coefs
        errors += np.mean((y[held_out, None] - predictions) ** 2, axis=0)
    errors /= folds

    best = int(np.argmin(errors))
    path = lasso_path(y, X, grid)
    logger.debug("lasso_cv: λ* = %.4g (grid index %d)", grid[best], best)
    return float(grid[best]), path.coefficient_vector(best)


def tlasso(y, X: DesignMatrix, k: int, folds: int = 5, seed: int = 0) -> Selection:
    """Thresholded Lasso: CV Lasso, then the k largest |β̂_i|.

    The result is flagged ``degenerate`` when β̂ has fewer than k nonzeros, in
    which case the tie-break fills the support with the smallest indices.
    """
    check_sparsity(k, X.p)
    lam, beta = lasso_cv(y, X, folds=folds, seed=seed)
    nonzeros = len(beta.support)
    support = top_k(np.abs(beta.values), k)
    return Selection(support, {"lambda": lam, "nonzeros": nonzeros, "degenerate": nonzeros < k})


def support_at_sparsity(path: LassoPath, k: int, y, X: DesignMatrix) -> Selection:
    """Match a Lasso path to sparsity k.

    Takes the largest λ whose active set has at least k variables and keeps its
    k largest |coefficients|. If no λ reaches k, the densest support is padded
    with the variables most correlated with its residual.
    """
    y = check_response(y, X)
    check_sparsity(k, X.p)
    sizes = np.array([len(s) for s in path.supports])
    reached = np.flatnonzero(sizes >= k)
    if reached.size:
        index = int(reached[0])
        support = top_k(np.abs(path.coefficients[:, index]), k)
        return Selection(support, {"lambda": float(path.lambdas[index]), "padded": 0})

    index = int(np.argmax(sizes))
    base = path.supports[index]
    residual = y - X.data @ path.coefficients[:, index]
    scores = np.abs(X.data.T @ residual)
    scores[list(base)] = -np.inf
    extra = top_k(scores, k - len(base))
    support = SupportSet.of(list(base) + list(extra))
    logger.debug("Lasso path never reached k=%d; padded %d variables", k, len(extra))
    return Selection(support, {"lambda": float(path.lambdas[index]), "padded": len(extra)})


class LassoSolver(SupportSolver):
    """Lasso matched to k along its path."""

    name = "lasso"
    defaults: Dict[str, Any] = {"n_lambdas": GRID_SIZE}

    def validate_config(self) -> None:
        self._check_keys(self.defaults)
        if int(self.config["n_lambdas"]) < 2:
            raise ValueError("n_lambdas must be >= 2")

    def select(self, y, X: DesignMatrix, k: int, seed: int) -> Selection:
        path = lasso_path(y, X, n_lambdas=int(self.config["n_lambdas"]))
        return support_at_sparsity(path, k, y, X)


class TLassoSolver(SupportSolver):
    """Cross-validated Lasso thresholded to its k largest coefficients."""

    name = "tlasso"
    defaults: Dict[str, Any] = {"folds": 5}

    def validate_config(self) -> None:
        self._check_keys(self.defaults)
        if int(self.config["folds"]) < 2:
            raise ValueError("folds must be >= 2")

    def select(self, y, X: DesignMatrix, k: int, seed: int) -> Selection:
        return tlasso(y, X, k, folds=int(self.config["folds"]), seed=seed)
