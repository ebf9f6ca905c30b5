"""Base class for support-selection solvers."""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable

import numpy as np

from swapreg.design import DesignMatrix, SupportSet


@dataclass(frozen=True)
class Selection:
    """A selected support plus solver-specific disclosures.

    Attributes:
        support: The size-k support
        metadata: Flags and counters, e.g. "degenerate", "padded",
            "backward_steps", "iterations"
    """

    support: SupportSet
    metadata: Dict[str, Any] = field(default_factory=dict)


class SupportSolver(ABC):
    """Abstract base class for sparse-regression solvers that return a size-k support.

    All solver implementations must provide methods to:
    1. Validate their parameters before use
    2. Select a support of a requested size for (y, X)
    """

    name = ""
    defaults: Dict[str, Any] = {}

    def __init__(self, config: Dict[str, Any]):
        """Initialize the solver with its parameters.

        Args:
            config: Solver-specific parameters; missing keys take ``defaults``
        """
        self.config = {**self.defaults, **config}

    @abstractmethod
    def validate_config(self) -> None:
        """Validate that the parameters are usable.

        Raises:
            ValueError: If a parameter is unknown or out of range
        """
        pass

    @abstractmethod
    def select(self, y: np.ndarray, X: DesignMatrix, k: int, seed: int) -> Selection:
        """Select a support of size k.

        Args:
            y: Response vector
            X: Normalized design matrix
            k: Target support size
            seed: Seed for any randomness (CV folds, random draws)

        Returns:
            Selection with exactly k indices
        """
        pass

    def _check_keys(self, allowed: Iterable[str]) -> None:
        unknown = sorted(set(self.config) - set(allowed))
        if unknown:
            raise ValueError(f"Unknown parameter(s) for {self.name}: {', '.join(unknown)}")

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.config})"
