"""Experiment configuration.

A user JSON document is deep-merged onto :data:`DEFAULT_CONFIG`, then frozen
into :class:`ExperimentConfig`. Unknown keys anywhere in the document are
errors. The schema is described in docs/experiment-config.md.
"""

import copy
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from solvers import SolverChoice

from .datagen import CovarianceSpec, GroupedPerBlock, Layout, OnePerBlock, build_covariance
from .errors import ConfigError, NotPositiveDefiniteError
from .ingest import LEUKEMIA_RECIPE, PROSTATE_RECIPE, ClusterRecipe, MatrixFile
from .swap import SwapOptions

logger = logging.getLogger(__name__)

# =============================================================================
# DEFAULTS - desk-scale sweep over the block-correlated design
# =============================================================================

DEFAULT_CONFIG: Dict[str, Any] = {
    "design": {
        # "synthetic" (generated per trial) or "csv" (fixed matrix, clustered supports)
        "source": "synthetic",

        # Covariance kind: "block", "bordered" or "identity"
        "kind": "block",
        "p": 100,

        # Block size for kind "block"; null means p / k
        "block_size": None,

        # "one_per_block" or "grouped" (uses blocks_chosen x per_block)
        "layout": {
            "type": "one_per_block",
            "blocks_chosen": None,
            "per_block": None,
        },

        # |β_i| on the support
        "magnitude": 1.0,

        # Use X = √n·Σ^{1/2} (n = p) instead of sampling rows
        "exact_gram": False,

        # Settings for source "csv"
        "csv": {
            "path": "",
            "delimiter": ",",
            "has_header": False,
            "p_max": None,
            "column_selection": "first",
            # "leukemia", "prostate" or null (use the three fields below)
            "recipe": "leukemia",
            "n_clusters": None,
            "clusters_to_pick": None,
            "per_cluster": None,
            "magnitude": 4.0,
        },
    },

    "n_grid": [60],
    "a_grid": [0.6, 0.8, 0.9],
    "k": 5,
    "sigma": 1.0,
    "trials": 50,
    "master_seed": 0,

    # Each entry: {"kind": ..., "params": {...}, "swap_wrap": bool}
    "solvers": [
        {"kind": "lasso", "params": {}, "swap_wrap": True},
        {"kind": "tlasso", "params": {}, "swap_wrap": True},
        {"kind": "foba", "params": {}, "swap_wrap": True},
        {"kind": "cosamp", "params": {}, "swap_wrap": True},
        {"kind": "mar", "params": {}, "swap_wrap": True},
        {"kind": "random", "params": {}, "swap_wrap": True},
    ],

    "swap": {
        "max_iterations": None,
        "epsilon_rel": 1e-12,
        "m": 1,
        "candidate_limit": None,
        "n_jobs": 1,
    },

    "output": {
        "out_dir": "results",
    },
}

SOLVER_ENTRY_KEYS = ("kind", "params", "swap_wrap")
RECIPES = {"leukemia": LEUKEMIA_RECIPE, "prostate": PROSTATE_RECIPE}

# Sections excluded from the config hash (they do not change results).
UNHASHED_SECTIONS = ("output",)


# =============================================================================
# MERGING
# =============================================================================

def merge_config(defaults: Dict[str, Any], overrides: Dict[str, Any], path: str = "") -> Dict[str, Any]:
    """Deep-merge ``overrides`` onto ``defaults``.

    Dicts merge recursively; any other value (lists included) replaces the
    default wholesale.

    Raises:
        ConfigError: On a key that does not exist in ``defaults``
    """
    if not isinstance(overrides, dict):
        raise ConfigError(f"Expected an object at '{path or '<root>'}', got {type(overrides).__name__}")
    merged = copy.deepcopy(defaults)
    for key, value in overrides.items():
        dotted = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"Unknown config key: {dotted}")
        if isinstance(defaults[key], dict):
            merged[key] = merge_config(defaults[key], value, dotted)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


# =============================================================================
# TYPED CONFIG
# =============================================================================

@dataclass(frozen=True)
class CsvSourceConfig:
    """A fixed design loaded from CSV plus the clustered-support recipe."""

    file: MatrixFile
    recipe: ClusterRecipe
    magnitude: float


@dataclass(frozen=True)
class DesignConfig:
    source: str
    kind: str
    p: int
    block_size: Optional[int]
    layout: Layout
    magnitude: float
    exact_gram: bool
    csv: Optional[CsvSourceConfig] = None

    def covariance(self, a: float, k: int) -> CovarianceSpec:
        """Covariance spec for correlation level ``a``."""
        if self.kind == "block":
            return CovarianceSpec("block", self.p, a=a, block_size=self.block_size)
        if self.kind == "bordered":
            return CovarianceSpec("bordered", self.p, a=a, k=k)
        return CovarianceSpec("identity", self.p)


@dataclass(frozen=True)
class SolverEntry:
    choice: SolverChoice
    swap_wrap: bool

    @property
    def name(self) -> str:
        return self.choice.kind


@dataclass(frozen=True)
class SwapConfig:
    max_iterations: Optional[int]
    epsilon_rel: float
    m: int
    candidate_limit: Optional[int]
    n_jobs: int

    def options(self) -> SwapOptions:
        return SwapOptions(
            max_iterations=self.max_iterations,
            epsilon_rel=self.epsilon_rel,
            m=self.m,
            candidate_limit=self.candidate_limit,
            n_jobs=self.n_jobs,
        )


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment settings.

    Attributes:
        design: Where instances come from
        n_grid: Sample sizes (ignored for csv sources, which use every row)
        a_grid: Correlation levels (ignored for csv sources)
        k: Support size
        sigma: Noise standard deviation
        trials: Trials per grid cell
        master_seed: Root of every derived seed
        solvers: Solvers to run, each optionally wrapped with SWAP
        swap: SWAP settings for wrapped runs
        out_dir: Directory for result files
        raw: The merged document (used for hashing and echoing)
    """

    design: DesignConfig
    n_grid: Tuple[int, ...]
    a_grid: Tuple[float, ...]
    k: int
    sigma: float
    trials: int
    master_seed: int
    solvers: Tuple[SolverEntry, ...]
    swap: SwapConfig
    out_dir: Path
    raw: Dict[str, Any]

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """Merge ``data`` onto the defaults and validate.

        Raises:
            ConfigError: On unknown keys or invalid values
        """
        raw = merge_config(DEFAULT_CONFIG, data)
        try:
            return cls._build(raw)
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from e

    @classmethod
    def _build(cls, raw: Dict[str, Any]) -> "ExperimentConfig":
        k = int(raw["k"])
        trials = int(raw["trials"])
        sigma = float(raw["sigma"])
        master_seed = int(raw["master_seed"])
        n_grid = tuple(int(n) for n in raw["n_grid"])
        a_grid = tuple(float(a) for a in raw["a_grid"])

        if not n_grid or not a_grid:
            raise ConfigError("n_grid and a_grid must be nonempty")
        if trials < 1:
            raise ConfigError(f"trials must be >= 1, got {trials}")
        if sigma < 0:
            raise ConfigError(f"sigma must be >= 0, got {sigma}")
        if master_seed < 0:
            raise ConfigError(f"master_seed must be >= 0, got {master_seed}")
        if any(n < 1 for n in n_grid):
            raise ConfigError("n_grid entries must be >= 1")

        design = _design_config(raw["design"], k)
        if design.source == "synthetic":
            if k < 1 or k > design.p:
                raise ConfigError(f"k must lie in [1, p = {design.p}], got {k}")
            for a in a_grid:
                spec = design.covariance(a, k)
                try:
                    build_covariance(spec)
                except NotPositiveDefiniteError as e:
                    raise ConfigError(f"a = {a}: {e}") from e
        elif design.csv.recipe.k != k:
            raise ConfigError(f"k = {k} does not match the cluster recipe (k = {design.csv.recipe.k})")

        solvers = tuple(_solver_entry(entry, i) for i, entry in enumerate(raw["solvers"]))
        if not solvers:
            raise ConfigError("At least one solver is required")
        names = [entry.name for entry in solvers]
        if len(set(names)) != len(names):
            raise ConfigError(f"Solver kinds must be unique, got {names}")

        swap = SwapConfig(**raw["swap"])
        swap.options()

        return cls(
            design=design,
            n_grid=n_grid,
            a_grid=a_grid,
            k=k,
            sigma=sigma,
            trials=trials,
            master_seed=master_seed,
            solvers=solvers,
            swap=swap,
            out_dir=Path(raw["output"]["out_dir"]).expanduser(),
            raw=raw,
        )

    def cells(self) -> List[Tuple[int, float, int, int]]:
        """Grid cells as (a_index, a, n_index, n)."""
        if self.design.source == "csv":
            return [(0, 0.0, 0, 0)]
        return [(ai, a, ni, n) for ai, a in enumerate(self.a_grid) for ni, n in enumerate(self.n_grid)]


def _design_config(raw: Dict[str, Any], k: int) -> DesignConfig:
    source = raw["source"]
    if source not in ("synthetic", "csv"):
        raise ConfigError(f"Unknown design source: {source}. Available: synthetic, csv")

    layout_raw = raw["layout"]
    if layout_raw["type"] == "one_per_block":
        layout: Layout = OnePerBlock()
    elif layout_raw["type"] == "grouped":
        if layout_raw["blocks_chosen"] is None or layout_raw["per_block"] is None:
            raise ConfigError("Layout 'grouped' needs blocks_chosen and per_block")
        layout = GroupedPerBlock(int(layout_raw["blocks_chosen"]), int(layout_raw["per_block"]))
    else:
        raise ConfigError(f"Unknown support layout: {layout_raw['type']}. Available: one_per_block, grouped")

    p = int(raw["p"])
    block_size = raw["block_size"]
    if raw["kind"] == "block" and block_size is None and source == "synthetic":
        if k < 1 or p % k:
            raise ConfigError(f"block_size is null, so k = {k} must divide p = {p}")
        block_size = p // k

    csv = _csv_config(raw["csv"]) if source == "csv" else None
    return DesignConfig(
        source=source,
        kind=raw["kind"],
        p=p,
        block_size=None if block_size is None else int(block_size),
        layout=layout,
        magnitude=float(raw["magnitude"]),
        exact_gram=bool(raw["exact_gram"]),
        csv=csv,
    )


def _csv_config(raw: Dict[str, Any]) -> CsvSourceConfig:
    if not raw["path"]:
        raise ConfigError("design.csv.path is required when design.source is 'csv'")
    file = MatrixFile(
        path=Path(raw["path"]).expanduser(),
        delimiter=raw["delimiter"],
        has_header=bool(raw["has_header"]),
        p_max=raw["p_max"],
        column_selection=raw["column_selection"],
    )
    if raw["recipe"] is None:
        fields = ("n_clusters", "clusters_to_pick", "per_cluster")
        missing = [name for name in fields if raw[name] is None]
        if missing:
            raise ConfigError(f"Custom cluster recipe needs {', '.join(missing)}")
        recipe = ClusterRecipe(*(int(raw[name]) for name in fields))
    elif raw["recipe"] in RECIPES:
        recipe = RECIPES[raw["recipe"]]
    else:
        raise ConfigError(f"Unknown cluster recipe: {raw['recipe']}. Available: {', '.join(RECIPES)}")
    return CsvSourceConfig(file=file, recipe=recipe, magnitude=float(raw["magnitude"]))


def _solver_entry(raw: Dict[str, Any], index: int) -> SolverEntry:
    if not isinstance(raw, dict):
        raise ConfigError(f"solvers[{index}] must be an object")
    unknown = sorted(set(raw) - set(SOLVER_ENTRY_KEYS))
    if unknown:
        raise ConfigError(f"Unknown config key: solvers[{index}].{unknown[0]}")
    if "kind" not in raw:
        raise ConfigError(f"solvers[{index}] is missing 'kind'")
    try:
        choice = SolverChoice(raw["kind"], dict(raw.get("params") or {}))
    except ValueError as e:
        raise ConfigError(f"solvers[{index}]: {e}") from e
    return SolverEntry(choice, bool(raw.get("swap_wrap", True)))


# =============================================================================
# LOADING AND HASHING
# =============================================================================

def load_config(path: Optional[Union[str, Path]] = None,
                overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Read a JSON config file (or none) and apply ``overrides`` on top.

    Raises:
        ConfigError: If the file is missing, is not valid JSON, or fails validation
    """
    data: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Config file does not exist: {path}")
        try:
            with open(path) as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {path} is not valid JSON: {e}") from e
    if overrides:
        data = merge_config(merge_config(DEFAULT_CONFIG, data), overrides)
    return ExperimentConfig.from_dict(data)


def config_hash(cfg: Union[ExperimentConfig, Dict[str, Any]]) -> str:
    """First 12 hex digits of the MD5 of the canonical config JSON."""
    raw = cfg.raw if isinstance(cfg, ExperimentConfig) else cfg
    hashed = {key: value for key, value in raw.items() if key not in UNHASHED_SECTIONS}
    canonical = json.dumps(hashed, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.md5(canonical.encode()).hexdigest()[:12]
