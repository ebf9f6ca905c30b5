"""Load external design matrices and build clustered supports.

CSV files are samples-by-variables; gzip-compressed files are read
transparently. Pseudo-real supports are drawn from k-means clusters of the
columns.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd
from sklearn.cluster import KMeans

from .design import DesignMatrix, SupportSet, normalize_columns
from .errors import InsufficientClusterSizesError, NonNumericCellError, ParseError, RaggedRowsError

logger = logging.getLogger(__name__)

COLUMN_SELECTIONS = ("first", "random")


@dataclass(frozen=True)
class MatrixFile:
    """Where and how to read a samples-by-variables matrix.

    Attributes:
        path: CSV file (``.gz`` is decompressed on the fly)
        delimiter: Field separator
        has_header: Skip the first row as column names
        p_max: Keep at most this many columns (before normalization)
        column_selection: "first" keeps the leading columns, "random" a seeded subset
        seed: Seed for the "random" selection
    """

    path: Union[str, Path]
    delimiter: str = ","
    has_header: bool = False
    p_max: Optional[int] = None
    column_selection: str = "first"
    seed: int = 0

    def __post_init__(self):
        if self.column_selection not in COLUMN_SELECTIONS:
            raise ValueError(
                f"Unknown column selection: {self.column_selection}. "
                f"Available: {', '.join(COLUMN_SELECTIONS)}"
            )
        if self.p_max is not None and self.p_max < 1:
            raise ValueError(f"p_max must be >= 1, got {self.p_max}")


@dataclass(frozen=True)
class ClusterRecipe:
    """How many column clusters to form and how to draw a support from them."""

    n_clusters: int
    clusters_to_pick: int
    per_cluster: int

    @property
    def k(self) -> int:
        return self.clusters_to_pick * self.per_cluster


LEUKEMIA_RECIPE = ClusterRecipe(n_clusters=20, clusters_to_pick=5, per_cluster=2)
PROSTATE_RECIPE = ClusterRecipe(n_clusters=20, clusters_to_pick=5, per_cluster=3)


def read_matrix_csv(file: MatrixFile) -> np.ndarray:
    """Parse the file into a float array without normalizing.

    Raises:
        FileNotFoundError: If the file does not exist
        RaggedRowsError: If rows have differing field counts
        NonNumericCellError: If a cell is not a number
        ParseError: For any other parse failure
    """
    path = Path(file.path)
    if not path.exists():
        raise FileNotFoundError(f"Matrix file does not exist: {path}")

    try:
        frame = pd.read_csv(
            path,
            sep=file.delimiter,
            header=0 if file.has_header else None,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=True,
            compression="infer",
        )
    except pd.errors.ParserError as e:
        raise RaggedRowsError(f"Could not parse {path}: {e}") from e
    except pd.errors.EmptyDataError as e:
        raise ParseError(f"Matrix file is empty: {path}") from e

    # short rows are padded with NaN by the parser
    short = frame.isna().any(axis=1).to_numpy()
    if short.any():
        row = int(np.flatnonzero(short)[0])
        raise RaggedRowsError("Row has too few fields", row=row)

    numeric = frame.apply(lambda column: pd.to_numeric(column.str.strip(), errors="coerce"))
    bad = numeric.isna().to_numpy()
    if bad.any():
        row, col = (int(v) for v in np.argwhere(bad)[0])
        raise NonNumericCellError(f"Non-numeric cell {frame.iat[row, col]!r}", row=row, col=col)
    return numeric.to_numpy(dtype=np.float64)


def _select_columns(data: np.ndarray, file: MatrixFile) -> np.ndarray:
    if file.p_max is None or file.p_max >= data.shape[1]:
        return data
    if file.column_selection == "first":
        return data[:, :file.p_max]
    rng = np.random.default_rng(file.seed)
    keep = np.sort(rng.choice(data.shape[1], size=file.p_max, replace=False))
    return data[:, keep]


def load_matrix_csv(file: MatrixFile) -> DesignMatrix:
    """Read, subsample columns, then normalize.

    Raises:
        ParseError: See :func:`read_matrix_csv`
        ZeroColumnError: If a kept column is identically zero
    """
    data = _select_columns(read_matrix_csv(file), file)
    logger.info("Loaded %d×%d matrix from %s", data.shape[0], data.shape[1], file.path)
    return normalize_columns(data)


def write_matrix_csv(matrix: Union[DesignMatrix, np.ndarray], path: Union[str, Path],
                     delimiter: str = ",") -> Path:
    """Write a matrix with full float precision (gzip when the suffix is .gz)."""
    data = matrix.data if isinstance(matrix, DesignMatrix) else np.asarray(matrix)
    path = Path(path)
    pd.DataFrame(data).to_csv(
        path, sep=delimiter, header=False, index=False, float_format="%.17g", compression="infer"
    )
    return path


def kmeans_columns(X: DesignMatrix, n_clusters: int, seed: int, max_iter: int = 100) -> np.ndarray:
    """Cluster the columns of X with seeded k-means++ / Lloyd.

    Returns:
        Integer label per column

    Raises:
        ValueError: If n_clusters is not in [1, p]
    """
    if not 1 <= n_clusters <= X.p:
        raise ValueError(f"n_clusters must lie in [1, {X.p}], got {n_clusters}")
    model = KMeans(
        n_clusters=n_clusters,
        init="k-means++",
        n_init=1,
        max_iter=max_iter,
        algorithm="lloyd",
        random_state=seed,
    )
    labels = model.fit_predict(np.ascontiguousarray(X.data.T))
    logger.debug("k-means on %d columns: inertia %.6g after %d iterations",
                 X.p, model.inertia_, model.n_iter_)
    return labels.astype(np.intp)


def cluster_support(labels, clusters_to_pick: int, per_cluster: int, seed) -> SupportSet:
    """Pick ``clusters_to_pick`` clusters uniformly, then ``per_cluster`` members of each.

    Only clusters with at least ``per_cluster`` members are eligible.

    Raises:
        InsufficientClusterSizesError: If fewer than ``clusters_to_pick`` clusters are eligible
    """
    labels = np.asarray(labels)
    if clusters_to_pick < 1 or per_cluster < 1:
        raise ValueError("clusters_to_pick and per_cluster must be >= 1")
    ids, sizes = np.unique(labels, return_counts=True)
    eligible = ids[sizes >= per_cluster]
    if eligible.size < clusters_to_pick:
        raise InsufficientClusterSizesError(
            f"Need {clusters_to_pick} clusters with >= {per_cluster} members, "
            f"found {eligible.size}"
        )
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(eligible, size=clusters_to_pick, replace=False))
    indices = []
    for label in chosen:
        members = np.flatnonzero(labels == label)
        indices.extend(int(j) for j in rng.choice(members, size=per_cluster, replace=False))
    return SupportSet.of(indices)
