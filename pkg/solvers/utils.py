"""Shared utilities for solvers."""

import numpy as np

from swapreg.design import SupportSet


def top_k(scores: np.ndarray, k: int) -> SupportSet:
    """Indices of the k largest scores, ties broken by smaller index.

    Args:
        scores: One score per variable
        k: Number of indices to keep

    Returns:
        Sorted SupportSet of size k
    """
    scores = np.asarray(scores, dtype=np.float64)
    if not 0 <= k <= scores.size:
        raise ValueError(f"k must lie in [0, {scores.size}], got {k}")
    order = np.argsort(-scores, kind="stable")
    return SupportSet.of(order[:k].tolist())


def check_sparsity(k: int, limit: int, what: str = "p") -> None:
    """Raise ValueError unless 0 <= k <= limit."""
    if not 0 <= k <= limit:
        raise ValueError(f"k must lie in [0, {what} = {limit}], got {k}")
