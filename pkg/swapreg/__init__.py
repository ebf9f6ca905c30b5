"""SWAP sparse regression: support refinement by greedy variable swapping.

Core numerics live here; solver baselines are in the ``solvers`` package and
the experiment runner in :mod:`swapreg.experiment` (imported on demand because
it depends on ``solvers``).
"""

from .design import CoefficientVector, DesignMatrix, SupportSet, normalize_columns
from .errors import SwapRegError
from .projection import ActiveFit, apply_swap, constrained_ls, fit_support, swap_loss
from .swap import StopReason, SwapOptions, SwapTrace, swap_m_run, swap_run

__version__ = "0.1.0"

__all__ = [
    "ActiveFit",
    "CoefficientVector",
    "DesignMatrix",
    "StopReason",
    "SupportSet",
    "SwapOptions",
    "SwapRegError",
    "SwapTrace",
    "apply_swap",
    "constrained_ls",
    "fit_support",
    "normalize_columns",
    "swap_loss",
    "swap_m_run",
    "swap_run",
]
