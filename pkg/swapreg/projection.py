"""Least-squares loss over a support and incremental QR updates.

An :class:`ActiveFit` caches a thin QR factorization of X_S together with the
residual of y after projecting onto span(X_S). Swapping one column is done by
removing it from the factorization (a small QR of the Hessenberg remainder of
R) and appending the candidate column after projecting it against Q.
"""

import logging
from dataclasses import dataclass, replace
from typing import Sequence, Tuple

import numpy as np
import scipy.linalg

from .design import CoefficientVector, DesignMatrix, SupportSet
from .errors import NonFiniteError, RankDeficientError

logger = logging.getLogger(__name__)

# A support is invalid when an R diagonal falls below RANK_TOL·√n.
RANK_TOL = 1e-10
# Committed swaps between full refactorizations.
REBUILD_EVERY = 64
# Max |QᵀQ − I| tolerated before refactorizing.
ORTHOGONALITY_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class ActiveFit:
    """Cached factorization and loss for one support.

    Attributes:
        support: Sorted support S
        order: Column order of the factorization (a permutation of S)
        q: n×|S| matrix with orthonormal columns spanning X_S
        r: |S|×|S| upper-triangular factor, X_order = q·r
        qty: Qᵀy
        residual: y − QQᵀy
        loss: ‖Π⊥[S]y‖²
        y_norm_sq: ‖y‖², the upper bound on loss
        swaps_since_rebuild: Committed swaps since the last full factorization
    """

    support: SupportSet
    order: Tuple[int, ...]
    q: np.ndarray
    r: np.ndarray
    qty: np.ndarray
    residual: np.ndarray
    loss: float
    y_norm_sq: float
    swaps_since_rebuild: int = 0

    @property
    def residual_norm_sq(self) -> float:
        return self.loss

    @property
    def n(self) -> int:
        return self.q.shape[0]

    def position(self, i: int) -> int:
        """Column position of variable i inside the factorization."""
        try:
            return self.order.index(int(i))
        except ValueError:
            raise ValueError(f"{i} is not in the support {self.support}") from None

    def orthogonality_error(self) -> float:
        """max |QᵀQ − I|, 0 for the empty support."""
        s = self.q.shape[1]
        if s == 0:
            return 0.0
        return float(np.max(np.abs(self.q.T @ self.q - np.eye(s))))

    def coefficients(self) -> np.ndarray:
        """Least-squares coefficients ordered like ``support``."""
        if not self.order:
            return np.zeros(0)
        alpha = scipy.linalg.solve_triangular(self.r, self.qty, lower=False)
        by_index = dict(zip(self.order, alpha))
        return np.array([by_index[i] for i in self.support])


def check_response(y, X: DesignMatrix) -> np.ndarray:
    """Return y as a float vector of length X.n.

    Raises:
        ValueError: If the length does not match
        NonFiniteError: If y contains NaN or Inf
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] != X.n:
        raise ValueError(f"Response must have shape ({X.n},), got {y.shape}")
    if not np.all(np.isfinite(y)):
        raise NonFiniteError("Response contains NaN or infinite entries")
    return y


def _loss_bounded(value: float, y_norm_sq: float) -> float:
    return float(min(max(value, 0.0), y_norm_sq))


def fit_support(y, X: DesignMatrix, S: SupportSet) -> ActiveFit:
    """Factorize X_S and compute L(S; y, X).

    Args:
        y: Response vector of length n
        X: Design matrix
        S: Support to fit

    Returns:
        ActiveFit with loss = min_α ‖y − X_S α‖²

    Raises:
        RankDeficientError: If |S| > n or an R diagonal is below 1e-10·√n
    """
    y = check_response(y, X)
    S.validate(X.p)
    y_norm_sq = float(y @ y)
    n, s = X.n, len(S)

    if s == 0:
        return ActiveFit(
            support=S,
            order=(),
            q=np.zeros((n, 0)),
            r=np.zeros((0, 0)),
            qty=np.zeros(0),
            residual=y.copy(),
            loss=y_norm_sq,
            y_norm_sq=y_norm_sq,
        )
    if s > n:
        raise RankDeficientError(S, f"{s} columns but only {n} samples")

    q, r = scipy.linalg.qr(X.columns(S), mode="economic")
    smallest = float(np.min(np.abs(np.diag(r))))
    if smallest < RANK_TOL * np.sqrt(n):
        raise RankDeficientError(S, f"min |R_jj| = {smallest:.3e}")

    qty = q.T @ y
    residual = y - q @ qty
    return ActiveFit(
        support=S,
        order=tuple(S),
        q=q,
        r=r,
        qty=qty,
        residual=residual,
        loss=_loss_bounded(residual @ residual, y_norm_sq),
        y_norm_sq=y_norm_sq,
    )


def remove_column(fit: ActiveFit, i: int, y) -> ActiveFit:
    """Downdate the factorization to S \\ {i}.

    Deleting column i from R leaves an upper-Hessenberg block; its QR gives the
    rotation G with X_{S\\i} = (QG)·R'.
    """
    y = np.asarray(y, dtype=np.float64)
    pos = fit.position(i)
    order = fit.order[:pos] + fit.order[pos + 1:]
    support = SupportSet(tuple(j for j in fit.support if j != int(i)))

    if not order:
        q = np.zeros((fit.n, 0))
        r = np.zeros((0, 0))
        qty = np.zeros(0)
    else:
        hessenberg = np.delete(fit.r, pos, axis=1)
        g, r = scipy.linalg.qr(hessenberg, mode="economic")
        q = fit.q @ g
        qty = g.T @ fit.qty

    residual = y - q @ qty
    return replace(
        fit,
        support=support,
        order=order,
        q=q,
        r=r,
        qty=qty,
        residual=residual,
        loss=_loss_bounded(residual @ residual, fit.y_norm_sq),
    )


def _append_terms(fit: ActiveFit, cols: np.ndarray):
    """Project candidate columns against Q (twice) and score them.

    Returns:
        Tuple (p_hat, coeffs, norms, t, losses) where column j of p_hat is the
        unit direction each candidate adds, coeffs = QᵀX_j, t = p̂ᵀresidual and
        losses[j] = ‖residual − p̂_j t_j‖² (+inf for numerically dependent columns)
    """
    q = fit.q
    if q.shape[1]:
        a1 = q.T @ cols
        proj = cols - q @ a1
        a2 = q.T @ proj
        proj -= q @ a2
        coeffs = a1 + a2
    else:
        proj = cols.copy()
        coeffs = np.zeros((0, cols.shape[1]))

    norms = np.linalg.norm(proj, axis=0)
    valid = norms >= RANK_TOL * np.sqrt(fit.n)
    safe = np.where(valid, norms, 1.0)
    p_hat = proj / safe
    t = p_hat.T @ fit.residual
    new_res = fit.residual[:, None] - p_hat * t
    losses = np.einsum("ij,ij->j", new_res, new_res)
    losses = np.minimum(np.maximum(losses, 0.0), fit.y_norm_sq)
    losses = np.where(valid, losses, np.inf)
    return p_hat, coeffs, norms, t, losses


def candidate_losses(fit: ActiveFit, candidates: Sequence[int], X: DesignMatrix) -> np.ndarray:
    """L(S ∪ {j}) for every candidate j, +inf where X_j ∈ span(X_S) numerically."""
    candidates = list(candidates)
    if not candidates:
        return np.zeros(0)
    return _append_terms(fit, X.columns(candidates))[4]


def add_column(fit: ActiveFit, j: int, X: DesignMatrix) -> ActiveFit:
    """Update the factorization to S ∪ {j}.

    Raises:
        RankDeficientError: If X_j lies in span(X_S) within tolerance
    """
    j = int(j)
    if j in fit.support:
        raise ValueError(f"{j} is already in the support {fit.support}")
    p_hat, coeffs, norms, t, losses = _append_terms(fit, X.columns([j]))
    support = SupportSet.of(list(fit.support) + [j])
    if not np.isfinite(losses[0]):
        raise RankDeficientError(support, f"column {j} is in the span of the rest")

    s = len(fit.order)
    r = np.zeros((s + 1, s + 1))
    r[:s, :s] = fit.r
    r[:s, s] = coeffs[:, 0]
    r[s, s] = norms[0]
    residual = fit.residual - p_hat[:, 0] * t[0]
    return replace(
        fit,
        support=support,
        order=fit.order + (j,),
        q=np.column_stack([fit.q, p_hat[:, 0]]),
        r=r,
        qty=np.append(fit.qty, t[0]),
        residual=residual,
        loss=float(losses[0]),
    )


def swap_loss(fit: ActiveFit, i: int, i_new: int, y, X: DesignMatrix) -> float:
    """L((S \\ {i}) ∪ {i_new}) without modifying ``fit``.

    Returns +inf when the swapped support is rank deficient.
    """
    if int(i_new) in fit.support:
        raise ValueError(f"{i_new} is already in the support {fit.support}")
    reduced = remove_column(fit, i, y)
    return float(candidate_losses(reduced, [i_new], X)[0])


def apply_swap(fit: ActiveFit, i: int, i_new: int, y, X: DesignMatrix) -> ActiveFit:
    """Commit the swap previewed by :func:`swap_loss`.

    The returned loss is the previewed value. After REBUILD_EVERY committed
    swaps, or when Q drifts from orthonormal, the factorization is recomputed
    from scratch.

    Raises:
        RankDeficientError: If the swapped support is rank deficient
    """
    swapped = add_column(remove_column(fit, i, y), i_new, X)
    swapped = replace(swapped, swaps_since_rebuild=fit.swaps_since_rebuild + 1)
    drift = swapped.orthogonality_error()
    if swapped.swaps_since_rebuild >= REBUILD_EVERY or drift > ORTHOGONALITY_TOL:
        logger.debug(
            "Refactorizing %s after %d swaps (drift %.2e)",
            swapped.support, swapped.swaps_since_rebuild, drift,
        )
        fresh = fit_support(y, X, swapped.support)
        swapped = replace(fresh, loss=swapped.loss)
    return swapped


def constrained_ls(y, X: DesignMatrix, S: SupportSet) -> CoefficientVector:
    """Least-squares coefficients restricted to S, zeros elsewhere.

    Raises:
        RankDeficientError: If X_S is rank deficient
    """
    fit = fit_support(y, X, S)
    return CoefficientVector.from_support(X.p, S, fit.coefficients())
