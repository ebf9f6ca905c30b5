"""Exhaustive-search decoder and recovery-condition quantities.

Everything here enumerates supports, so every entry point checks the number of
evaluations against an explicit limit and raises CombinatorialBlowupError
instead of truncating. Projected Gram blocks Σ^B = XᵀΠ⊥[B]X/n are formed from
least-squares residuals against X_B, never from an n×n projector.
"""

import json
import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from itertools import combinations
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.special import comb

from .design import CoefficientVector, DesignMatrix, SupportSet
from .errors import CombinatorialBlowupError, DomainError, RankDeficientError
from .projection import RANK_TOL, check_response, fit_support

logger = logging.getLogger(__name__)

ENUMERATION_LIMIT = 1e6
# Σ^B_ii below this is a degenerate denominator.
DENOMINATOR_TOL = 1e-12
# Inner blocks with λ_min below this are treated as singular.
SINGULAR_TOL = 1e-12

NU_MODES = ("missing", "single")


def _guard(what: str, count: int, limit: float) -> None:
    if count > limit:
        raise CombinatorialBlowupError(what, count, limit)


# =============================================================================
# EXHAUSTIVE SEARCH
# =============================================================================

@dataclass(frozen=True)
class EsdResult:
    """Outcome of the exhaustive search decoder.

    runner_up_loss is the smallest loss among the other supports (inf if none),
    so ``runner_up_loss > loss`` certifies a unique minimizer.
    """

    support: SupportSet
    loss: float
    runner_up_loss: float
    evaluated: int


def esd_scan(y, X: DesignMatrix, k: int, limit: float = ENUMERATION_LIMIT) -> EsdResult:
    """Evaluate L(S) for every size-k support and keep the minimizer.

    Ties go to the lexicographically first support. Rank-deficient supports
    are skipped.

    Raises:
        CombinatorialBlowupError: If C(p, k) exceeds ``limit``
        RankDeficientError: If no size-k support is valid
    """
    y = check_response(y, X)
    if not 0 <= k <= X.p:
        raise ValueError(f"k must lie in [0, {X.p}], got {k}")
    _guard(f"size-{k} supports of {X.p} columns", comb(X.p, k, exact=True), limit)

    best: Optional[Tuple[float, SupportSet]] = None
    runner_up = math.inf
    evaluated = 0
    for combo in combinations(range(X.p), k):
        S = SupportSet(combo)
        try:
            loss = fit_support(y, X, S).loss
        except RankDeficientError:
            continue
        evaluated += 1
        if best is None or loss < best[0]:
            if best is not None:
                runner_up = min(runner_up, best[0])
            best = (loss, S)
        else:
            runner_up = min(runner_up, loss)

    if best is None:
        raise RankDeficientError((), f"no valid support of size {k}")
    return EsdResult(best[1], best[0], runner_up, evaluated)


def esd(y, X: DesignMatrix, k: int, limit: float = ENUMERATION_LIMIT) -> SupportSet:
    """The size-k support minimizing the least-squares loss."""
    return esd_scan(y, X, k, limit).support


# =============================================================================
# RESTRICTED EIGENVALUES
# =============================================================================

def _lambda_min(gram: np.ndarray, A: Sequence[int]) -> float:
    A = list(A)
    return float(scipy.linalg.eigvalsh(gram[np.ix_(A, A)])[0])


def rho_plus(X: DesignMatrix, S_star: SupportSet, ell: int,
             limit: float = ENUMERATION_LIMIT) -> float:
    """min λ_min(X_AᵀX_A/n) over A ⊇ S* with |A| = |S*| + ell."""
    S_star.validate(X.p)
    outside = S_star.complement(X.p)
    if not 0 <= ell <= outside.size:
        raise ValueError(f"ell must lie in [0, {outside.size}], got {ell}")
    _guard(f"supersets of S* with {ell} extra columns", comb(outside.size, ell, exact=True), limit)

    gram = X.gram()
    best = math.inf
    for extra in combinations(outside.tolist(), ell):
        best = min(best, _lambda_min(gram, sorted(S_star.indices + extra)))
    return best


def _rho_cap_count(k: int, rest: int, size: int, ell: int) -> int:
    return sum(
        comb(k, j, exact=True) * comb(rest, size - j, exact=True)
        for j in range(ell, min(k, size) + 1)
    )


def rho_cap(X: DesignMatrix, S_star: SupportSet, ell: int, size: Optional[int] = None,
            limit: float = ENUMERATION_LIMIT) -> float:
    """min λ_min(X_AᵀX_A/n) over |A| = size with |A ∩ S*| >= ell.

    ``size`` defaults to |S*|; size = |S*| − 1 with ell = 0 gives the
    all-supports eigenvalue one size down.
    """
    S_star.validate(X.p)
    k = len(S_star)
    size = k if size is None else size
    outside = S_star.complement(X.p).tolist()
    if not 1 <= size <= X.p:
        raise ValueError(f"size must lie in [1, {X.p}], got {size}")
    if not 0 <= ell <= min(k, size):
        raise ValueError(f"ell must lie in [0, {min(k, size)}], got {ell}")
    _guard(
        f"size-{size} supports with >= {ell} active columns",
        _rho_cap_count(k, len(outside), size, ell),
        limit,
    )

    gram = X.gram()
    best = math.inf
    for j in range(ell, min(k, size) + 1):
        if size - j > len(outside):
            continue
        for inside in combinations(S_star.indices, j):
            for extra in combinations(outside, size - j):
                best = min(best, _lambda_min(gram, sorted(inside + extra)))
    return best


# =============================================================================
# PROJECTED CORRELATION PARAMETERS
# =============================================================================

def _omega_count(k: int, rest: int, d: int) -> int:
    return sum(comb(k, k - t, exact=True) * comb(rest, t, exact=True) for t in range(1, d + 1))


def _omega_supports(S_star: SupportSet, p: int, d: int) -> Iterator[SupportSet]:
    """Supports of size k missing between 1 and d active variables."""
    outside = S_star.complement(p).tolist()
    k = len(S_star)
    for t in range(1, min(d, k, len(outside)) + 1):
        for inside in combinations(S_star.indices, k - t):
            for extra in combinations(outside, t):
                yield SupportSet.of(inside + extra)


class _ProjectedGram:
    """Σ^B restricted to a few columns, from residuals against X_B."""

    def __init__(self, X: DesignMatrix, B: Sequence[int]):
        self.X = X
        B = list(B)
        if B:
            q, r = scipy.linalg.qr(X.columns(B), mode="economic")
            if np.min(np.abs(np.diag(r))) < RANK_TOL * np.sqrt(X.n):
                raise RankDeficientError(B)
            self.q = q
        else:
            self.q = np.zeros((X.n, 0))

    def block(self, cols: Sequence[int]) -> np.ndarray:
        Z = self.X.columns(cols)
        if self.q.shape[1]:
            Z = Z - self.q @ (self.q.T @ Z)
        return Z.T @ Z / self.X.n


def _check_family(X: DesignMatrix, S_star: SupportSet, k: int, d: int, limit: float) -> None:
    S_star.validate(X.p)
    if k != len(S_star):
        raise ValueError(f"k = {k} does not match |S*| = {len(S_star)}")
    if not 0 <= d <= k:
        raise ValueError(f"d must lie in [0, {k}], got {d}")
    _guard(f"supports missing up to {d} active columns", _omega_count(k, X.p - k, d), limit)


def gamma_d(X: DesignMatrix, S_star: SupportSet, k: int, d: int,
            skipped: Optional[Counter] = None, limit: float = ENUMERATION_LIMIT) -> float:
    """Worst-case projected correlation between inactive and missing active columns.

    For every S of size k missing 1..d active variables, takes the minimum over
    inactive i ∈ S of ‖Σ^B_{i,S̄}(Σ^B_{S̄,S̄})⁻¹‖₁² / Σ^B_{i,i} with B = S\\{i} and
    S̄ = S*\\S, then the maximum over S. Candidates with a degenerate
    denominator or singular inner block are skipped and counted in ``skipped``.
    Returns 0 when nothing remains.
    """
    _check_family(X, S_star, k, d, limit)
    skipped = skipped if skipped is not None else Counter()
    worst = 0.0
    for S in _omega_supports(S_star, X.p, d):
        missing = [j for j in S_star if j not in S]
        best_i = math.inf
        for i in (j for j in S if j not in S_star):
            B = [j for j in S if j != i]
            try:
                sigma = _ProjectedGram(X, B).block([i] + missing)
            except RankDeficientError:
                skipped["singular_projection"] += 1
                continue
            if sigma[0, 0] < DENOMINATOR_TOL:
                skipped["degenerate_denominator"] += 1
                continue
            inner = sigma[1:, 1:]
            if scipy.linalg.eigvalsh(inner)[0] < SINGULAR_TOL:
                skipped["singular_block"] += 1
                continue
            w = scipy.linalg.solve(inner, sigma[1:, 0], assume_a="pos")
            best_i = min(best_i, float(np.sum(np.abs(w))) ** 2 / sigma[0, 0])
        if math.isinf(best_i):
            skipped["support_without_candidates"] += 1
            continue
        worst = max(worst, best_i)
    if skipped:
        logger.debug("gamma_%d skipped candidates: %s", d, dict(skipped))
    return worst


def nu_d(X: DesignMatrix, S_star: SupportSet, k: int, d: int, mode: str = "missing",
         skipped: Optional[Counter] = None, limit: float = ENUMERATION_LIMIT) -> float:
    """Projected correlation parameter for initializations close to S*.

    For S of size k missing 1..d active variables and inactive i ∈ S, j ∈ S\\{i},
    inactive j' ∉ S, with B = S\\{i,j} and index set T:

        (‖Σ^B_{i,T}(Σ^B_{T,T})⁻¹‖₁² + ‖Σ^B_{j',T}(Σ^B_{T,T})⁻¹‖₁²) / min(Σ^B_{ii}, Σ^B_{j'j'})

    is maximized over (j, j'), minimized over i and maximized over S.
    ``mode="missing"`` uses T = (S*\\S) ∪ {j}; ``mode="single"`` uses
    T = (S\\{i}) ∪ {j} with the columns of B dropped (they vanish after
    projection), which leaves T = {j}. Returns 0 when nothing remains,
    in particular for k = 1 where no j exists.
    """
    if mode not in NU_MODES:
        raise ValueError(f"Unknown nu mode: {mode}. Available: {', '.join(NU_MODES)}")
    _check_family(X, S_star, k, d, limit)
    skipped = skipped if skipped is not None else Counter()
    worst = 0.0
    for S in _omega_supports(S_star, X.p, d):
        missing = [j for j in S_star if j not in S]
        others = [j for j in S.complement(X.p) if j not in S_star]
        if not others:
            skipped["no_inactive_outside"] += 1
            continue
        best_i = math.inf
        for i in (j for j in S if j not in S_star):
            worst_pair = -math.inf
            for j in (v for v in S if v != i):
                B = [v for v in S if v not in (i, j)]
                T = missing + [j] if mode == "missing" else [j]
                try:
                    sigma = _ProjectedGram(X, B).block([i] + others + T)
                except RankDeficientError:
                    skipped["singular_projection"] += 1
                    continue
                m = 1 + len(others)
                inner = sigma[m:, m:]
                if scipy.linalg.eigvalsh(inner)[0] < SINGULAR_TOL:
                    skipped["singular_block"] += 1
                    continue
                w = scipy.linalg.solve(inner, sigma[m:, :m], assume_a="pos")
                l1_sq = np.sum(np.abs(w), axis=0) ** 2
                diag = np.diag(sigma)[:m]
                denom = np.minimum(diag[0], diag[1:])
                ok = denom >= DENOMINATOR_TOL
                skipped["degenerate_denominator"] += int(np.count_nonzero(~ok))
                if not np.any(ok):
                    continue
                values = (l1_sq[0] + l1_sq[1:][ok]) / denom[ok]
                worst_pair = max(worst_pair, float(np.max(values)))
            if worst_pair > -math.inf:
                best_i = min(best_i, worst_pair)
        if math.isinf(best_i):
            skipped["support_without_candidates"] += 1
            continue
        worst = max(worst, best_i)
    return worst


def zeta(X: DesignMatrix, S_star: SupportSet) -> float:
    """max over inactive i of ‖Σ_{i,S*}Σ_{S*,S*}⁻¹‖₁² (the ℓ₁ norm is squared)."""
    S_star.validate(X.p)
    inactive = S_star.complement(X.p)
    if inactive.size == 0 or len(S_star) == 0:
        return 0.0
    gram = X.gram()
    active = S_star.as_array()
    w = scipy.linalg.solve(gram[np.ix_(active, active)], gram[np.ix_(active, inactive)], assume_a="pos")
    return float(np.max(np.sum(np.abs(w), axis=0)) ** 2)


def beta_min(beta: CoefficientVector) -> float:
    """Smallest nonzero magnitude of β (0 for the zero vector)."""
    nonzero = np.abs(beta.values[beta.values != 0.0])
    return float(nonzero.min()) if nonzero.size else 0.0


def g_eval(delta: float, rho: float, c: float) -> float:
    """g(δ, ρ, c) = (δ − 1) + 2c(√δ + 1/√ρ) + 2c².

    Raises:
        DomainError: If δ < 0 or ρ <= 0
    """
    if delta < 0:
        raise DomainError(f"delta must be >= 0, got {delta}")
    if rho <= 0:
        raise DomainError(f"rho must be > 0, got {rho}")
    return (delta - 1.0) + 2.0 * c * (math.sqrt(delta) + 1.0 / math.sqrt(rho)) + 2.0 * c * c


def check_event_ekd(y, X: DesignMatrix, S1: SupportSet, S_star: SupportSet, k: int, d: int,
                    limit: float = ENUMERATION_LIMIT) -> bool:
    """True iff L(S1) is strictly below every other size-k support missing >= d actives.

    d = 0 makes the family all size-k supports, i.e. S1 is the strict ESD minimizer.
    """
    y = check_response(y, X)
    S1.validate(X.p)
    S_star.validate(X.p)
    if len(S1) != k:
        raise ValueError(f"|S1| = {len(S1)} does not match k = {k}")
    ks = len(S_star)
    rest = X.p - ks
    count = sum(
        comb(ks, ks - t, exact=True) * comb(rest, k - ks + t, exact=True)
        for t in range(d, ks + 1)
        if 0 <= k - ks + t <= rest
    )
    _guard(f"size-{k} supports missing >= {d} active columns", count, limit)

    reference = fit_support(y, X, S1).loss
    outside = S_star.complement(X.p).tolist()
    for t in range(d, ks + 1):
        if not 0 <= k - ks + t <= rest:
            continue
        for inside in combinations(S_star.indices, ks - t):
            for extra in combinations(outside, k - ks + t):
                S = SupportSet.of(inside + extra)
                if S == S1:
                    continue
                try:
                    loss = fit_support(y, X, S).loss
                except RankDeficientError:
                    continue
                if loss <= reference:
                    return False
    return True


# =============================================================================
# THEOREM CONDITIONS
# =============================================================================

def _log_comb(p: int, k: int) -> float:
    return math.lgamma(p + 1) - math.lgamma(k + 1) - math.lgamma(p - k + 1)


def _sample_condition(n: int, numerator: float, scale: Optional[float], sigma: float) -> Dict[str, Any]:
    """n > numerator / scale; vacuous without noise, unknown without a scale."""
    if sigma == 0:
        return {"bound": 0.0, "passes": True}
    if scale is None:
        return {"bound": None, "passes": False}
    bound = math.inf if scale <= 0 else numerator / scale
    return {"bound": bound, "passes": n > bound}


def _g_condition(delta: Optional[float], rho: Optional[float], c_sigma: float) -> Dict[str, Any]:
    if delta is None or rho is None or rho <= 0:
        return {"delta": delta, "rho": rho, "c_sigma": c_sigma, "g": None, "passes": False}
    value = g_eval(delta, rho, c_sigma)
    return {"delta": delta, "rho": rho, "c_sigma": c_sigma, "g": value, "passes": value < 0}


def theorem_predicates(report: "TheoryReport", n: int, p: int, k: int, sigma: float, c: float,
                       d: Optional[int] = None) -> Dict[str, Dict[str, Any]]:
    """Evaluate each recovery theorem's sufficient conditions.

    Args:
        report: Quantities computed for the instance
        n, p, k: Problem dimensions
        sigma: Noise standard deviation
        c: Constant with 0 < c² < 1/(18σ²); any value works when σ = 0
        d: Missing-active count for the partial-optimality and ν conditions
            (defaults to the largest d in the report)

    Returns:
        Dict of records, one per theorem, each with the plugged-in numbers and
        an overall ``holds`` flag
    """
    if sigma < 0 or c < 0:
        raise DomainError("sigma and c must be nonnegative")
    if d is None:
        d = max(report.gamma) if report.gamma else k
    admissible = sigma == 0 or (c > 0 and c * c < 1.0 / (18.0 * sigma * sigma))
    rho_2k = report.rho_plus.get(k)
    bmin = report.beta_min
    c_sigma = c * sigma

    def scale(power: int, divisor: float) -> Optional[float]:
        if rho_2k is None or bmin is None:
            return None
        return c * c * bmin * bmin * rho_2k ** power / divisor

    log_k2 = math.log(k * k * (p - k)) if p > k else -math.inf
    log_pk = _log_comb(p, k)
    log_pd = _log_comb(p, d) if 0 <= d <= p else 0.0

    records: Dict[str, Dict[str, Any]] = {}

    records["exhaustive_search"] = {
        "sample": _sample_condition(n, 4 + log_k2, scale(1, 1.0), sigma),
    }
    records["swap_one_off"] = {
        "sample": _sample_condition(n, 4 + log_k2, scale(1, 2.0), sigma),
    }
    records["swap_gamma"] = {
        "g": _g_condition(report.gamma.get(k), report.rho_cap.get(1), c_sigma),
        "counting": {"lhs": log_pk, "rhs": 4 + log_k2, "passes": log_pk > 4 + log_k2},
        "sample": _sample_condition(n, 2 * log_pk, scale(2, 1.0), sigma),
    }
    records["swap_partial"] = {
        "d": d,
        "g": _g_condition(report.gamma.get(d - 1) if d > 1 else 0.0, report.rho_cap.get(1), c_sigma),
        "counting": {"lhs": 3 * log_pd, "rhs": 4 + log_k2, "passes": 3 * log_pd > 4 + log_k2},
        "sample": _sample_condition(n, 6 * log_pd, scale(2, 1.0), sigma),
    }
    rho_small = report.rho_km1 / 2 if report.rho_km1 is not None else None
    log_kp = math.log(k * (p - k)) if p > k and k > 0 else -math.inf
    records["swap_nu"] = {
        "d": d,
        "g": _g_condition(report.nu.get(d), rho_small, c_sigma),
        "sample": _sample_condition(n, 2 * k + log_kp, scale(2, 4.0), sigma),
    }

    for record in records.values():
        checks = [v["passes"] for v in record.values() if isinstance(v, dict)]
        record["c_admissible"] = admissible
        record["holds"] = admissible and all(checks)
    records["inputs"] = {"n": n, "p": p, "k": k, "sigma": sigma, "c": c, "d": d}
    return records


# =============================================================================
# REPORT
# =============================================================================

@dataclass
class TheoryReport:
    """All recovery-condition quantities for one instance."""

    k: int
    p: int
    n: int
    rho_plus: Dict[int, float] = field(default_factory=dict)
    rho_cap: Dict[int, float] = field(default_factory=dict)
    rho_km1: Optional[float] = None
    gamma: Dict[int, float] = field(default_factory=dict)
    nu: Dict[int, float] = field(default_factory=dict)
    zeta: float = 0.0
    beta_min: Optional[float] = None
    nu_mode: str = "missing"
    g_values: List[Dict[str, Any]] = field(default_factory=list)
    predicates: Dict[str, Any] = field(default_factory=dict)
    skipped: Dict[str, int] = field(default_factory=dict)

    def evaluate(self, sigma: float, c: float, d: Optional[int] = None) -> Dict[str, Any]:
        """Fill ``predicates`` and ``g_values`` for the given noise level and constant."""
        self.predicates = theorem_predicates(self, self.n, self.p, self.k, sigma, c, d)
        self.g_values = [
            dict(record["g"], theorem=name)
            for name, record in self.predicates.items()
            if isinstance(record, dict) and "g" in record
        ]
        return self.predicates

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        for key in ("rho_plus", "rho_cap", "gamma", "nu"):
            data[key] = {str(k): v for k, v in data[key].items()}
        return data

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TheoryReport":
        data = json.loads(text)
        for key in ("rho_plus", "rho_cap", "gamma", "nu"):
            data[key] = {int(k): v for k, v in data.get(key, {}).items()}
        return cls(**data)


def build_theory_report(
    X: DesignMatrix,
    S_star: SupportSet,
    beta_star: Optional[CoefficientVector] = None,
    ell_values: Optional[Sequence[int]] = None,
    d_values: Optional[Sequence[int]] = None,
    nu_mode: str = "missing",
    limit: float = ENUMERATION_LIMIT,
) -> TheoryReport:
    """Compute every quantity for one instance.

    Args:
        X: Design matrix
        S_star: True support
        beta_star: True coefficients (for β_min)
        ell_values: ℓ values for ρ_{k+ℓ} and ρ_{k,ℓ} (default 0..min(k, p − k))
        d_values: d values for γ_d and ν_d (default 1..k)
        nu_mode: "missing" or "single"
        limit: Enumeration guard per quantity

    Returns:
        TheoryReport without predicates (call :meth:`TheoryReport.evaluate`)
    """
    k, p = len(S_star), X.p
    if ell_values is None:
        ell_values = range(0, min(k, p - k) + 1)
    if d_values is None:
        d_values = range(1, k + 1)

    report = TheoryReport(k=k, p=p, n=X.n, nu_mode=nu_mode)
    skipped: Counter = Counter()
    for ell in ell_values:
        report.rho_plus[ell] = rho_plus(X, S_star, ell, limit)
        if ell <= k:
            report.rho_cap[ell] = rho_cap(X, S_star, ell, limit=limit)
    if k >= 2:
        report.rho_km1 = rho_cap(X, S_star, 0, size=k - 1, limit=limit)
    for d in d_values:
        report.gamma[d] = gamma_d(X, S_star, k, d, skipped, limit)
        report.nu[d] = nu_d(X, S_star, k, d, nu_mode, skipped, limit)
    report.zeta = zeta(X, S_star)
    if beta_star is not None:
        report.beta_min = beta_min(beta_star)
    report.skipped = dict(skipped)
    logger.info("Theory report for k=%d, p=%d: zeta=%.4g", k, p, report.zeta)
    return report
