"""Synthetic problem generation.

Block-correlated Gaussian designs, the bordered covariance whose Lasso
irrepresentability fails while SWAP still succeeds, exact-Gram realizations,
sign-random coefficients and Gaussian noise. Every generator is a pure
function of its spec and seed.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Union

import numpy as np
import scipy.linalg

from .design import CoefficientVector, DesignMatrix, SupportSet, normalize_columns
from .errors import NotPositiveDefiniteError

logger = logging.getLogger(__name__)

COVARIANCE_KINDS = ("block", "bordered", "identity")


@dataclass(frozen=True)
class CovarianceSpec:
    """Population covariance of the design rows.

    kind "block": block-diagonal, unit diagonal and correlation ``a`` inside
    each block of ``block_size`` columns. kind "bordered": identity except
    that the last column has correlation ``a`` with each of the first ``k``
    columns. kind "identity": I.
    """

    kind: str
    p: int
    a: float = 0.0
    block_size: Optional[int] = None
    k: Optional[int] = None

    def __post_init__(self):
        if self.kind not in COVARIANCE_KINDS:
            raise ValueError(
                f"Unknown covariance kind: {self.kind}. Available: {', '.join(COVARIANCE_KINDS)}"
            )
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if self.kind == "block":
            if self.block_size is None or self.block_size < 1 or self.p % self.block_size:
                raise ValueError(f"block_size must divide p = {self.p}, got {self.block_size}")
            if not 0 <= self.a < 1:
                raise ValueError(f"Block correlation must lie in [0, 1), got {self.a}")
        if self.kind == "bordered":
            if self.k is None or not 1 <= self.k < self.p:
                raise ValueError(f"bordered needs 1 <= k < p, got k = {self.k}")
            if self.a < 0:
                raise ValueError(f"bordered needs a >= 0, got {self.a}")

    @property
    def blocks(self) -> List[np.ndarray]:
        """Column index groups used for support placement."""
        if self.kind == "block":
            return [np.arange(s, s + self.block_size) for s in range(0, self.p, self.block_size)]
        return [np.array([j]) for j in range(self.p)]

    def to_dict(self) -> Dict[str, Any]:
        return {key: value for key, value in asdict(self).items() if value is not None}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CovarianceSpec":
        return cls(**data)


@dataclass(frozen=True)
class OnePerBlock:
    """Each support variable sits in a different block."""


@dataclass(frozen=True)
class GroupedPerBlock:
    """``per_block`` support variables in each of ``blocks_chosen`` blocks."""

    blocks_chosen: int
    per_block: int


Layout = Union[OnePerBlock, GroupedPerBlock]


@dataclass(frozen=True, eq=False)
class SyntheticInstance:
    """One generated regression problem y = Xβ* + w."""

    X: DesignMatrix
    y: np.ndarray
    beta_star: CoefficientVector
    S_star: SupportSet
    sigma: float
    seed: int
    spec: CovarianceSpec
    noise: np.ndarray = field(repr=False, default=None)

    @property
    def beta_min(self) -> float:
        values = np.abs(self.beta_star.values[list(self.S_star)])
        return float(values.min()) if values.size else 0.0


def build_covariance(spec: CovarianceSpec) -> np.ndarray:
    """Dense p×p covariance for ``spec``.

    Raises:
        NotPositiveDefiniteError: If the matrix is not positive definite
            (for bordered this happens exactly when a >= 1/√k)
    """
    if spec.kind == "identity":
        sigma = np.eye(spec.p)
    elif spec.kind == "block":
        block = (1.0 - spec.a) * np.eye(spec.block_size) + spec.a
        sigma = scipy.linalg.block_diag(*[block] * (spec.p // spec.block_size))
    else:
        if spec.a * np.sqrt(spec.k) >= 1.0:
            raise NotPositiveDefiniteError(
                f"bordered with k = {spec.k}, a = {spec.a}: λ_min = 1 − a√k = "
                f"{1 - spec.a * np.sqrt(spec.k):.4g} <= 0"
            )
        sigma = np.eye(spec.p)
        sigma[spec.p - 1, :spec.k] = spec.a
        sigma[:spec.k, spec.p - 1] = spec.a

    try:
        scipy.linalg.cholesky(sigma, lower=True)
    except np.linalg.LinAlgError as e:
        raise NotPositiveDefiniteError(f"Covariance for {spec.kind} is not positive definite: {e}")
    return sigma


def sample_gaussian_design(spec: CovarianceSpec, n: int, seed) -> DesignMatrix:
    """Rows i.i.d. N(0, Σ), then columns normalized."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    factor = scipy.linalg.cholesky(build_covariance(spec), lower=True)
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, spec.p))
    return normalize_columns(Z @ factor.T)


def exact_gram_design(spec: CovarianceSpec) -> DesignMatrix:
    """X = √n·Σ^{1/2} with n = p, so XᵀX/n = Σ."""
    sigma = build_covariance(spec)
    eigvals, eigvecs = scipy.linalg.eigh(sigma)
    root = (eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))) @ eigvecs.T
    root = (root + root.T) / 2
    # every kind has a unit diagonal, so normalizing only removes rounding
    return normalize_columns(np.sqrt(spec.p) * root)


def place_support(spec: CovarianceSpec, k: int, layout: Layout, seed) -> SupportSet:
    """Choose the true support according to ``layout``.

    bordered always uses the first k columns.
    """
    if spec.kind == "bordered":
        return SupportSet(tuple(range(spec.k)))

    rng = np.random.default_rng(seed)
    blocks = spec.blocks
    if isinstance(layout, OnePerBlock):
        if k > len(blocks):
            raise ValueError(f"k = {k} exceeds the number of blocks ({len(blocks)})")
        chosen = np.sort(rng.choice(len(blocks), size=k, replace=False))
        return SupportSet.of(int(rng.choice(blocks[b])) for b in chosen)

    if isinstance(layout, GroupedPerBlock):
        if layout.blocks_chosen * layout.per_block != k:
            raise ValueError(
                f"GroupedPerBlock({layout.blocks_chosen}, {layout.per_block}) "
                f"does not give k = {k}"
            )
        if layout.blocks_chosen > len(blocks):
            raise ValueError(f"Only {len(blocks)} blocks available")
        if any(block.size < layout.per_block for block in blocks):
            raise ValueError(f"Blocks are smaller than per_block = {layout.per_block}")
        chosen = np.sort(rng.choice(len(blocks), size=layout.blocks_chosen, replace=False))
        indices: List[int] = []
        for b in chosen:
            indices.extend(int(j) for j in rng.choice(blocks[b], size=layout.per_block, replace=False))
        return SupportSet.of(indices)

    raise ValueError(f"Unknown support layout: {layout!r}")


def gen_beta(S_star: SupportSet, p: int, magnitude: float = 1.0, seed=None) -> CoefficientVector:
    """±magnitude on S* with equiprobable signs, zeros elsewhere."""
    if magnitude <= 0:
        raise ValueError(f"magnitude must be > 0, got {magnitude}")
    rng = np.random.default_rng(seed)
    signs = rng.integers(0, 2, size=len(S_star)) * 2 - 1
    return CoefficientVector.from_support(p, S_star.validate(p), magnitude * signs)


def synthesize(
    spec: CovarianceSpec,
    n: int,
    k: int,
    sigma: float,
    layout: Layout,
    seed: int,
    magnitude: float = 1.0,
    exact_gram: bool = False,
) -> SyntheticInstance:
    """Generate design, support, coefficients and noise from one seed.

    Independent streams are spawned from ``np.random.SeedSequence(seed)`` for
    the design, the support, the signs and the noise. With ``exact_gram`` the
    design is the deterministic exact-Gram realization and n is ignored.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    design_seq, support_seq, beta_seq, noise_seq = np.random.SeedSequence(seed).spawn(4)

    X = exact_gram_design(spec) if exact_gram else sample_gaussian_design(spec, n, design_seq)
    S_star = place_support(spec, k, layout, support_seq)
    beta = gen_beta(S_star, spec.p, magnitude, beta_seq)
    noise = sigma * np.random.default_rng(noise_seq).standard_normal(X.n)
    y = X.data @ beta.values + noise
    logger.debug("Synthesized %s instance n=%d p=%d k=%d seed=%s", spec.kind, X.n, spec.p, k, seed)
    return SyntheticInstance(X, y, beta, S_star, sigma, seed, spec, noise)
