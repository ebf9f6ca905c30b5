"""Non-iterative baselines: marginal regression and random supports."""

from typing import Any, Dict

import numpy as np

from swapreg.design import DesignMatrix, SupportSet
from swapreg.projection import check_response

from .base import Selection, SupportSolver
from .utils import check_sparsity, top_k


def marginal_regression(y, X: DesignMatrix, k: int) -> SupportSet:
    """Indices of the k largest |X_jᵀy|, ties to the smaller index."""
    y = check_response(y, X)
    check_sparsity(k, X.p)
    return top_k(np.abs(X.data.T @ y), k)


def random_support(p: int, k: int, seed) -> SupportSet:
    """Uniform k-subset of range(p), deterministic per seed."""
    check_sparsity(k, p)
    rng = np.random.default_rng(seed)
    return SupportSet.of(rng.choice(p, size=k, replace=False).tolist())


class MarginalSolver(SupportSolver):
    """Marginal regression (MaR)."""

    name = "mar"

    def validate_config(self) -> None:
        self._check_keys(())

    def select(self, y, X: DesignMatrix, k: int, seed: int) -> Selection:
        return Selection(marginal_regression(y, X, k))


class RandomSolver(SupportSolver):
    """Uniformly random support, the weakest SWAP initialization."""

    name = "random"
    defaults: Dict[str, Any] = {}

    def validate_config(self) -> None:
        self._check_keys(())

    def select(self, y, X: DesignMatrix, k: int, seed: int) -> Selection:
        return Selection(random_support(X.p, k, seed))
