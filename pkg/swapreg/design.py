"""Core value types: design matrices, supports and coefficient vectors."""

from dataclasses import dataclass, field
from typing import Iterable, Tuple, Union

import numpy as np

from .errors import NonFiniteError, ZeroColumnError

# Tolerance on |‖X_i‖²/n − 1| for a matrix flagged as normalized.
NORMALIZATION_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """The n×p measurement matrix X.

    The array is stored column-major and read-only; every operation that
    "changes" a design returns a new instance.

    Attributes:
        data: n×p float array
        normalized: True when every column satisfies ‖X_i‖²/n = 1
    """

    data: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, order="F", copy=True)
        if data.ndim != 2:
            raise ValueError(f"Design matrix must be 2-D, got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"Design matrix must be non-empty, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise NonFiniteError("Design matrix contains NaN or infinite entries")
        if self.normalized:
            scaled = np.einsum("ij,ij->j", data, data) / data.shape[0]
            worst = float(np.max(np.abs(scaled - 1.0)))
            if worst > NORMALIZATION_TOL:
                raise ValueError(
                    f"Matrix flagged normalized but max |‖X_i‖²/n − 1| = {worst:.3e}"
                )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def p(self) -> int:
        return self.data.shape[1]

    def columns(self, indices: Iterable[int]) -> np.ndarray:
        """Return the n×|indices| sub-matrix (a copy)."""
        return self.data[:, list(indices)]

    def gram(self) -> np.ndarray:
        """Return XᵀX/n."""
        return self.data.T @ self.data / self.n


@dataclass(frozen=True)
class SupportSet:
    """A strictly increasing tuple of column indices."""

    indices: Tuple[int, ...] = ()

    def __post_init__(self):
        indices = tuple(int(i) for i in self.indices)
        for prev, cur in zip(indices, indices[1:]):
            if cur <= prev:
                raise ValueError(f"Support indices must be strictly increasing: {indices}")
        if indices and indices[0] < 0:
            raise ValueError(f"Support indices must be nonnegative: {indices}")
        object.__setattr__(self, "indices", indices)

    @classmethod
    def of(cls, indices: Iterable[int]) -> "SupportSet":
        """Build a support from indices in any order; duplicates are rejected."""
        values = [int(i) for i in indices]
        unique = sorted(set(values))
        if len(unique) != len(values):
            raise ValueError(f"Duplicate indices in support: {values}")
        return cls(tuple(unique))

    def validate(self, p: int) -> "SupportSet":
        """Raise ValueError if any index is outside [0, p)."""
        if self.indices and self.indices[-1] >= p:
            raise ValueError(f"Support index {self.indices[-1]} out of range for p = {p}")
        return self

    def complement(self, p: int) -> np.ndarray:
        """Indices in [0, p) that are not in the support, ascending."""
        mask = np.ones(p, dtype=bool)
        mask[list(self.indices)] = False
        return np.flatnonzero(mask)

    def swap(self, out: int, into: int) -> "SupportSet":
        """Return (S \\ {out}) ∪ {into}."""
        if out not in self.indices:
            raise ValueError(f"{out} is not in the support")
        if into in self.indices:
            raise ValueError(f"{into} is already in the support")
        return SupportSet.of([i for i in self.indices if i != out] + [into])

    def as_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.intp)

    def to_list(self) -> list:
        return list(self.indices)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, item) -> bool:
        return int(item) in self.indices

    def __repr__(self) -> str:
        return f"SupportSet({list(self.indices)})"


@dataclass(frozen=True, eq=False)
class CoefficientVector:
    """A p-vector whose nonzeros are confined to ``support``."""

    values: np.ndarray
    support: SupportSet = field(default_factory=SupportSet)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 1:
            raise ValueError("Coefficient vector must be 1-D")
        self.support.validate(values.shape[0])
        off = np.ones(values.shape[0], dtype=bool)
        off[list(self.support)] = False
        if np.any(values[off] != 0.0):
            raise ValueError("Coefficient vector has nonzeros outside its support")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_support(cls, p: int, support: SupportSet, coef: np.ndarray) -> "CoefficientVector":
        """Scatter ``coef`` (ordered like ``support``) into a length-p vector."""
        values = np.zeros(p)
        values[list(support)] = coef
        return cls(values, support)

    @property
    def p(self) -> int:
        return self.values.shape[0]


def normalize_columns(X: Union[DesignMatrix, np.ndarray]) -> DesignMatrix:
    """Scale every column to squared norm n.

    Args:
        X: Design matrix or raw n×p array

    Returns:
        New DesignMatrix with column i equal to X_i·√n/‖X_i‖ and the normalized flag set

    Raises:
        ZeroColumnError: If some column has zero norm
    """
    data = X.data if isinstance(X, DesignMatrix) else np.asarray(X, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError(f"Design matrix must be 2-D, got shape {data.shape}")
    if not np.all(np.isfinite(data)):
        raise NonFiniteError("Design matrix contains NaN or infinite entries")
    norms = np.linalg.norm(data, axis=0)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroColumnError(int(zero[0]))
    scaled = data * (np.sqrt(data.shape[0]) / norms)
    return DesignMatrix(scaled, normalized=True)
