"""Experiment runner: trial sweeps, summaries and solution paths.

Trials run concurrently on joblib threads. Every trial derives its seeds from
(master_seed, a index, n index, trial) only, and rows are sorted before they
are written, so result files do not depend on the thread count.
"""

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from solvers import SupportSolver

from .config import ExperimentConfig, config_hash
from .datagen import SyntheticInstance, gen_beta, synthesize
from .design import CoefficientVector, DesignMatrix, SupportSet
from .errors import EmptyTrueSupportError
from .ingest import cluster_support, kmeans_columns, load_matrix_csv
from .projection import candidate_losses, check_response, fit_support
from .swap import SwapOptions, SwapTrace, swap_m_run, swap_run

logger = logging.getLogger(__name__)

# Significant digits kept for floats written to result files.
FLOAT_DIGITS = 12

PAIRED_COLUMNS = ["a", "n", "solver", "mean", "min", "q1", "median", "q3", "max", "count"]


def tpr(S_hat: Iterable[int], S_star: Iterable[int]) -> float:
    """True positive rate |Ŝ ∩ S*| / |S*|.

    Raises:
        EmptyTrueSupportError: If S* is empty
    """
    truth = set(int(i) for i in S_star)
    if not truth:
        raise EmptyTrueSupportError("TPR is undefined for an empty true support")
    return len(truth & set(int(i) for i in S_hat)) / len(truth)


def _stable(value: Any) -> Any:
    """Round floats so serialized rows are byte-stable."""
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return None
        return float(f"{value:.{FLOAT_DIGITS}g}")
    if isinstance(value, dict):
        return {str(k): _stable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_stable(v) for v in value]
    return value


# =============================================================================
# SEEDS
# =============================================================================

def derive_seed(*entropy: int) -> int:
    """64-bit seed from a tuple of nonnegative integers."""
    state = np.random.SeedSequence([int(e) for e in entropy]).generate_state(1, dtype=np.uint64)
    return int(state[0])


# =============================================================================
# RESULTS
# =============================================================================

@dataclass
class TrialResult:
    """One solver run (optionally SWAP-wrapped) on one instance."""

    config_hash: str
    a: float
    n: int
    trial: int
    solver: str
    wrapped: bool
    seed: int
    support: List[int] = field(default_factory=list)
    tpr: Optional[float] = None
    loss: Optional[float] = None
    swap_iterations: int = 0
    metadata: Dict[str, Any] = field(default_factory=dict)
    error: Optional[str] = None
    wall_time_ms: float = 0.0

    @property
    def sort_key(self) -> Tuple[float, int, int, str, bool]:
        return (self.a, self.n, self.trial, self.solver, self.wrapped)

    def to_dict(self, include_timing: bool = False) -> Dict[str, Any]:
        data = _stable(asdict(self))
        if not include_timing:
            data.pop("wall_time_ms")
        return data

    def to_json_line(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrialResult":
        return cls(**data)


@dataclass(frozen=True, eq=False)
class Instance:
    """One regression problem: design, response and the truth behind it."""

    X: DesignMatrix
    y: np.ndarray
    beta: CoefficientVector
    S_star: SupportSet
    sigma: float
    seed: int

    @classmethod
    def from_synthetic(cls, inst: SyntheticInstance) -> "Instance":
        return cls(inst.X, inst.y, inst.beta_star, inst.S_star, inst.sigma, int(inst.seed))


class CsvSource:
    """Loaded matrix and column clusters shared by all csv trials."""

    def __init__(self, cfg: ExperimentConfig):
        source = cfg.design.csv
        self.X = load_matrix_csv(source.file)
        self.labels = kmeans_columns(self.X, source.recipe.n_clusters, seed=cfg.master_seed)
        self.recipe = source.recipe
        self.magnitude = source.magnitude
        self.sigma = cfg.sigma

    def instance(self, seed: int) -> Instance:
        support_seq, beta_seq, noise_seq = np.random.SeedSequence(seed).spawn(3)
        S_star = cluster_support(self.labels, self.recipe.clusters_to_pick, self.recipe.per_cluster, support_seq)
        beta = gen_beta(S_star, self.X.p, self.magnitude, beta_seq)
        noise = self.sigma * np.random.default_rng(noise_seq).standard_normal(self.X.n)
        return Instance(self.X, self.X.data @ beta.values + noise, beta, S_star, self.sigma, seed)


def build_instance(cfg: ExperimentConfig, cell: Tuple[int, float, int, int], trial: int,
                   csv_source: Optional[CsvSource] = None) -> Instance:
    """The instance for one grid cell and trial (same for every solver)."""
    ai, a, ni, n = cell
    seed = derive_seed(cfg.master_seed, ai, ni, trial)
    if cfg.design.source == "csv":
        return (csv_source or CsvSource(cfg)).instance(seed)
    spec = cfg.design.covariance(a, cfg.k)
    inst = synthesize(
        spec, n, cfg.k, cfg.sigma, cfg.design.layout, seed,
        magnitude=cfg.design.magnitude, exact_gram=cfg.design.exact_gram,
    )
    return Instance.from_synthetic(inst)


def _wrap(y, X: DesignMatrix, support: SupportSet, options: SwapOptions) -> SwapTrace:
    if options.m > 1:
        return swap_m_run(y, X, support, options)
    return swap_run(y, X, support, options)


def _run_cell(cfg: ExperimentConfig, cfg_id: str, cell: Tuple[int, float, int, int], trial: int,
              csv_source: Optional[CsvSource]) -> List[TrialResult]:
    ai, a, ni, _ = cell
    inst = build_instance(cfg, cell, trial, csv_source)
    n, seed = inst.X.n, inst.seed

    options = cfg.swap.options()
    rows: List[TrialResult] = []
    for si, entry in enumerate(cfg.solvers):
        solver_seed = derive_seed(cfg.master_seed, ai, ni, trial, si)
        base = TrialResult(cfg_id, a, n, trial, entry.name, False, seed)
        start = time.perf_counter()
        try:
            selection = entry.choice.build().select(inst.y, inst.X, cfg.k, solver_seed)
            base.support = selection.support.to_list()
            base.tpr = tpr(selection.support, inst.S_star)
            base.loss = fit_support(inst.y, inst.X, selection.support).loss
            base.metadata = dict(selection.metadata)
        except Exception as e:
            logger.warning("Trial %d (a=%s, n=%d) %s failed: %s", trial, a, n, entry.name, e)
            base.error = f"{type(e).__name__}: {e}"
        base.wall_time_ms = 1000.0 * (time.perf_counter() - start)
        rows.append(base)

        if not entry.swap_wrap:
            continue
        wrapped = TrialResult(cfg_id, a, n, trial, entry.name, True, seed)
        if base.error is not None:
            wrapped.error = base.error
            rows.append(wrapped)
            continue
        start = time.perf_counter()
        try:
            trace = _wrap(inst.y, inst.X, selection.support, options)
            wrapped.support = trace.final.to_list()
            wrapped.tpr = tpr(trace.final, inst.S_star)
            wrapped.loss = trace.final_loss
            wrapped.swap_iterations = trace.iterations
            wrapped.metadata = {
                "initial_tpr": base.tpr,
                "initial_loss": base.loss,
                "stop_reason": trace.stop_reason.value,
            }
        except Exception as e:
            logger.warning("SWAP on %s (trial %d) failed: %s", entry.name, trial, e)
            wrapped.error = f"{type(e).__name__}: {e}"
        wrapped.wall_time_ms = base.wall_time_ms + 1000.0 * (time.perf_counter() - start)
        rows.append(wrapped)
    return rows


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> List[TrialResult]:
    """Run every (a, n, trial, solver) combination of ``cfg``.

    Solver failures are recorded in the row's ``error`` field and do not stop
    the sweep.

    Args:
        cfg: Validated configuration
        threads: Worker threads for trials

    Returns:
        Rows sorted by (a, n, trial, solver, wrapped)
    """
    cfg_id = config_hash(cfg)
    csv_source = CsvSource(cfg) if cfg.design.source == "csv" else None
    tasks = [(cell, trial) for cell in cfg.cells() for trial in range(cfg.trials)]
    logger.info("Running %d trials x %d solvers on %d thread(s)", len(tasks), len(cfg.solvers), threads)

    batches = Parallel(n_jobs=threads, prefer="threads")(
        delayed(_run_cell)(cfg, cfg_id, cell, trial, csv_source) for cell, trial in tasks
    )
    rows = [row for batch in batches for row in batch]
    rows.sort(key=lambda row: row.sort_key)
    return rows


# =============================================================================
# SUMMARIES
# =============================================================================

@dataclass(frozen=True, eq=False)
class Summary:
    """Grouped means and paired wrapped-minus-base TPR differences."""

    means: pd.DataFrame
    paired: pd.DataFrame


def results_frame(results: Sequence[Union[TrialResult, Dict[str, Any]]]) -> pd.DataFrame:
    """Rows as a DataFrame, error rows dropped."""
    records = [r.to_dict(include_timing=True) if isinstance(r, TrialResult) else dict(r) for r in results]
    frame = pd.DataFrame.from_records(
        records,
        columns=["a", "n", "trial", "solver", "wrapped", "tpr", "loss", "swap_iterations", "error"],
    )
    if frame.empty:
        return frame
    ok = frame["error"].isna()
    dropped = int((~ok).sum())
    if dropped:
        logger.info("Skipping %d error row(s) in summary", dropped)
    frame = frame[ok].drop(columns="error")
    return frame.astype({"tpr": float, "loss": float, "swap_iterations": int, "wrapped": bool})


def summarize(results: Sequence[Union[TrialResult, Dict[str, Any]]]) -> Summary:
    """Mean TPR (with standard error) and paired SWAP gains.

    ``means`` has one row per (a, n, solver, wrapped) with tpr_mean, tpr_sem,
    count, iterations_mean and loss_mean. ``paired`` has one row per
    (a, n, solver) describing wrapped TPR minus base TPR over trials: mean,
    min, q1, median, q3, max and count.
    """
    frame = results_frame(results)
    keys = ["a", "n", "solver", "wrapped"]
    if frame.empty:
        empty_means = pd.DataFrame(columns=keys + ["tpr_mean", "tpr_sem", "count", "iterations_mean", "loss_mean"])
        return Summary(empty_means, pd.DataFrame(columns=PAIRED_COLUMNS))

    means = (
        frame.groupby(keys, sort=True)
        .agg(
            tpr_mean=("tpr", "mean"),
            tpr_sem=("tpr", "sem"),
            count=("tpr", "size"),
            iterations_mean=("swap_iterations", "mean"),
            loss_mean=("loss", "mean"),
        )
        .reset_index()
    )

    pair_keys = ["a", "n", "trial", "solver"]
    base = frame[~frame["wrapped"]][pair_keys + ["tpr"]]
    wrapped = frame[frame["wrapped"]][pair_keys + ["tpr"]]
    joined = base.merge(wrapped, on=pair_keys, suffixes=("_base", "_wrapped"))
    if joined.empty:
        return Summary(means, pd.DataFrame(columns=PAIRED_COLUMNS))
    joined["diff"] = joined["tpr_wrapped"] - joined["tpr_base"]
    grouped = joined.groupby(["a", "n", "solver"], sort=True)["diff"]
    paired = grouped.agg(
        mean="mean",
        min="min",
        q1=lambda s: s.quantile(0.25),
        median="median",
        q3=lambda s: s.quantile(0.75),
        max="max",
        count="size",
    ).reset_index()
    return Summary(means, paired)


# =============================================================================
# SOLUTION PATH
# =============================================================================

@dataclass(frozen=True)
class PathPoint:
    """Base and SWAP-refined supports at one sparsity level."""

    k: int
    base_support: SupportSet
    base_loss: float
    refined_support: SupportSet
    refined_loss: float
    swap_iterations: int
    warm_started: bool = False
    base_tpr: Optional[float] = None
    refined_tpr: Optional[float] = None

    def to_row(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "base_support": " ".join(str(i) for i in self.base_support),
            "base_loss": self.base_loss,
            "base_tpr": self.base_tpr,
            "refined_support": " ".join(str(i) for i in self.refined_support),
            "refined_loss": self.refined_loss,
            "refined_tpr": self.refined_tpr,
            "swap_iterations": self.swap_iterations,
            "warm_started": self.warm_started,
        }


def _forward_extension(y, X: DesignMatrix, support: SupportSet) -> SupportSet:
    """``support`` plus the outside variable that lowers the loss most."""
    fit = fit_support(y, X, support)
    outside = support.complement(X.p)
    losses = candidate_losses(fit, outside, X)
    return SupportSet.of(list(support) + [int(outside[int(np.argmin(losses))])])


def solution_path_mode(
    y,
    X: DesignMatrix,
    k_max: int,
    solver: SupportSolver,
    seed: int = 0,
    S_star: Optional[SupportSet] = None,
    swap_options: Optional[SwapOptions] = None,
    monotone: bool = True,
) -> List[PathPoint]:
    """Solver supports and their SWAP refinements for k' = 1..k_max.

    With ``monotone`` each level also runs SWAP from the previous refined
    support extended by its best forward addition, and keeps whichever run
    ends lower. Refined losses are then nonincreasing in k'.

    Raises:
        ValueError: If k_max is not in [1, min(n, p)]
    """
    y = check_response(y, X)
    if not 1 <= k_max <= min(X.n, X.p):
        raise ValueError(f"k_max must lie in [1, {min(X.n, X.p)}], got {k_max}")
    options = swap_options or SwapOptions()

    points: List[PathPoint] = []
    previous: Optional[SupportSet] = None
    for level in range(1, k_max + 1):
        selection = solver.select(y, X, level, seed)
        base_loss = fit_support(y, X, selection.support).loss
        trace = swap_run(y, X, selection.support, options)
        warm = False
        if monotone and previous is not None:
            warm_trace = swap_run(y, X, _forward_extension(y, X, previous), options)
            if warm_trace.final_loss < trace.final_loss:
                trace, warm = warm_trace, True

        point = PathPoint(
            k=level,
            base_support=selection.support,
            base_loss=base_loss,
            refined_support=trace.final,
            refined_loss=trace.final_loss,
            swap_iterations=trace.iterations,
            warm_started=warm,
            base_tpr=tpr(selection.support, S_star) if S_star else None,
            refined_tpr=tpr(trace.final, S_star) if S_star else None,
        )
        logger.debug("Path k=%d: loss %.6g -> %.6g", level, base_loss, trace.final_loss)
        points.append(point)
        previous = trace.final
    return points


# =============================================================================
# FILES
# =============================================================================

def write_results(results: Sequence[TrialResult], path: Union[str, Path]) -> Path:
    """One JSON object per line, without timings."""
    path = Path(path)
    with open(path, "w") as f:
        for row in results:
            f.write(row.to_json_line() + "\n")
    return path


def read_results(path: Union[str, Path]) -> List[Dict[str, Any]]:
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]


def write_timings(results: Sequence[TrialResult], path: Union[str, Path]) -> Path:
    path = Path(path)
    frame = pd.DataFrame(
        [
            {"a": r.a, "n": r.n, "trial": r.trial, "solver": r.solver,
             "wrapped": r.wrapped, "wall_time_ms": r.wall_time_ms}
            for r in results
        ]
    )
    frame.to_csv(path, index=False)
    return path


def write_summary(summary: Summary, out_dir: Union[str, Path], cfg_id: str) -> Tuple[Path, Path]:
    """Write tpr-<hash>.csv and paired-<hash>.csv."""
    out_dir = Path(out_dir)
    tpr_path = out_dir / f"tpr-{cfg_id}.csv"
    paired_path = out_dir / f"paired-{cfg_id}.csv"
    summary.means.to_csv(tpr_path, index=False, float_format="%.12g")
    summary.paired.to_csv(paired_path, index=False, float_format="%.12g")
    return tpr_path, paired_path


def write_path(points: Sequence[PathPoint], path: Union[str, Path]) -> Path:
    path = Path(path)
    pd.DataFrame([p.to_row() for p in points]).to_csv(path, index=False, float_format="%.12g")
    return path


def save_instance(instance: Instance, path: Union[str, Path]) -> Path:
    """Store X, y, β*, S*, σ and the seed in an .npz file."""
    path = Path(path)
    np.savez(
        path,
        X=instance.X.data,
        y=instance.y,
        beta=instance.beta.values,
        support=instance.S_star.as_array(),
        sigma=np.float64(instance.sigma),
        seed=np.uint64(instance.seed),
    )
    return path


def load_instance(path: Union[str, Path]) -> Instance:
    """Read an instance written by :func:`save_instance`."""
    with np.load(Path(path)) as data:
        S_star = SupportSet(tuple(int(i) for i in data["support"]))
        return Instance(
            X=DesignMatrix(data["X"], normalized=True),
            y=np.array(data["y"]),
            beta=CoefficientVector(np.array(data["beta"]), S_star),
            S_star=S_star,
            sigma=float(data["sigma"]),
            seed=int(data["seed"]),
        )
