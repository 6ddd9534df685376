"""Turn a RecordBatch into a fully numeric matrix: encode, impute, standardize.

Missing cells are carried as NaN inside the matrix until imputation; parse
never admits NaN as data, so NaN here always means "missing".
"""

from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .datamodel import Category, Number, RecordBatch

logger = logging.getLogger(__name__)

EncodingDictionary = dict[str, dict[str, int]]


class ColumnKind(str, Enum):
    NUMERIC = "numeric"
    ENCODED = "encoded"


@dataclass
class FeatureMatrix:
    """Dense row-per-record matrix with per-column metadata.

    ``values`` may contain NaN (= Missing) before imputation and never after.
    """

    values: np.ndarray
    column_names: list[str]
    column_kinds: list[ColumnKind]
    row_ids: list[str]

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {self.values.shape}")
        n_rows, n_cols = self.values.shape
        if n_rows != len(self.row_ids):
            raise ValueError(f"{n_rows} rows but {len(self.row_ids)} row_ids")
        if n_cols != len(self.column_names) or n_cols != len(self.column_kinds):
            raise ValueError(
                f"{n_cols} columns but {len(self.column_names)} names / {len(self.column_kinds)} kinds"
            )

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def has_missing(self) -> bool:
        return bool(np.isnan(self.values).any())


def encode(
    batch: RecordBatch,
    dictionary: EncodingDictionary | None = None,
) -> tuple[FeatureMatrix, EncodingDictionary]:
    """Ordinal-encode a batch: one column per schema field.

    Numbers pass through, categories map through the dictionary (codes
    assigned 0,1,2,... in first-seen order), Missing stays NaN. The input
    dictionary is never mutated; the returned one carries any extensions.
    Categories unseen in a supplied dictionary extend it and are logged as a
    drift signal.
    """
    fitted = dictionary is not None
    result: EncodingDictionary = copy.deepcopy(dictionary) if dictionary else {}
    columns = list(batch.schema)
    values = np.full((len(batch.records), len(columns)), np.nan)
    col_index = {name: i for i, name in enumerate(columns)}
    drift: dict[str, int] = {}

    for row, record in enumerate(batch.records):
        for name, value in record.fields.items():
            col = col_index[name]
            if isinstance(value, Number):
                values[row, col] = value.value
            elif isinstance(value, Category):
                codes = result.setdefault(name, {})
                if value.text not in codes:
                    codes[value.text] = len(codes)
                    if fitted:
                        drift[name] = drift.get(name, 0) + 1
                values[row, col] = codes[value.text]

    if drift:
        logger.info(
            "encode extended dictionary with unseen categories: %s",
            ", ".join(f"{k}+{v}" for k, v in sorted(drift.items())),
        )

    kinds = [
        ColumnKind.ENCODED if name in result else ColumnKind.NUMERIC
        for name in columns
    ]
    matrix = FeatureMatrix(
        values=values,
        column_names=columns,
        column_kinds=kinds,
        row_ids=[r.record_id for r in batch.records],
    )
    return matrix, result


def impute_numeric(column: np.ndarray) -> np.ndarray:
    """Fill missing cells from a least-squares line over (row index, value).

    One observed value fills everywhere with it; none fills with 0.
    """
    column = np.asarray(column, dtype=float).copy()
    missing = np.isnan(column)
    if not missing.any():
        return column
    observed = ~missing
    n_obs = int(observed.sum())
    if n_obs == 0:
        return np.zeros_like(column)
    if n_obs == 1:
        column[missing] = column[observed][0]
        return column
    idx = np.arange(len(column), dtype=float)
    xi, yi = idx[observed], column[observed]
    x_mean, y_mean = xi.mean(), yi.mean()
    slope = float(((xi - x_mean) * (yi - y_mean)).sum() / ((xi - x_mean) ** 2).sum())
    intercept = y_mean - slope * x_mean
    column[missing] = intercept + slope * idx[missing]
    return column


def impute_categorical_backfill(column: np.ndarray) -> np.ndarray:
    """Each missing cell takes the next observed code; trailing ones take the last.

    An all-missing column becomes all 0.
    """
    column = np.asarray(column, dtype=float).copy()
    missing = np.isnan(column)
    if not missing.any():
        return column
    if missing.all():
        return np.zeros_like(column)
    next_observed = np.nan
    for i in range(len(column) - 1, -1, -1):
        if missing[i]:
            column[i] = next_observed
        else:
            next_observed = column[i]
    # trailing cells had no later observation; forward-fill from the last one
    still_missing = np.isnan(column)
    if still_missing.any():
        last_observed = column[~still_missing][-1]
        column[still_missing] = last_observed
    return column


def impute(matrix: FeatureMatrix) -> FeatureMatrix:
    """Apply the per-kind imputation to every column; result has no NaN."""
    values = matrix.values.copy()
    for col, kind in enumerate(matrix.column_kinds):
        if kind is ColumnKind.ENCODED:
            values[:, col] = impute_categorical_backfill(values[:, col])
        else:
            values[:, col] = impute_numeric(values[:, col])
    return FeatureMatrix(
        values=values,
        column_names=list(matrix.column_names),
        column_kinds=list(matrix.column_kinds),
        row_ids=list(matrix.row_ids),
    )


ColumnStats = list[tuple[float, float]]


def standardize(
    matrix: FeatureMatrix,
    stats: ColumnStats | None = None,
) -> tuple[FeatureMatrix, ColumnStats]:
    """Scale each column to (x - mean)/stddev; population stddev, zero-variance
    columns become all 0. Supplied stats are reused (scoring); otherwise they
    are computed from the matrix (fitting) and returned either way.
    """
    if matrix.has_missing():
        raise ValueError("standardize requires a fully imputed matrix")
    values = matrix.values.copy()
    if stats is None:
        stats = [
            (float(values[:, col].mean()), float(values[:, col].std()))
            for col in range(values.shape[1])
        ]
    if len(stats) != values.shape[1]:
        raise ValueError(f"{len(stats)} stats for {values.shape[1]} columns")
    for col, (mean, std) in enumerate(stats):
        if std == 0.0:
            values[:, col] = 0.0
        else:
            values[:, col] = (values[:, col] - mean) / std
    out = FeatureMatrix(
        values=values,
        column_names=list(matrix.column_names),
        column_kinds=list(matrix.column_kinds),
        row_ids=list(matrix.row_ids),
    )
    return out, stats


def conform_columns(
    matrix: FeatureMatrix,
    column_names: list[str],
    column_kinds: list[ColumnKind],
) -> FeatureMatrix:
    """Reindex a matrix onto a reference column set.

    Columns absent from the matrix come back all-missing (imputation fills
    them); columns absent from the reference are dropped.
    """
    values = np.full((matrix.n_rows, len(column_names)), np.nan)
    have = {name: i for i, name in enumerate(matrix.column_names)}
    dropped = [name for name in matrix.column_names if name not in set(column_names)]
    for col, name in enumerate(column_names):
        if name in have:
            values[:, col] = matrix.values[:, have[name]]
    if dropped:
        logger.info("conform_columns dropped columns not in reference: %s", dropped)
    return FeatureMatrix(
        values=values,
        column_names=list(column_names),
        column_kinds=list(column_kinds),
        row_ids=list(matrix.row_ids),
    )


def encoding_to_json(dictionary: EncodingDictionary) -> str:
    return json.dumps(dictionary, indent=2, sort_keys=True)


def encoding_from_json(text: str) -> EncodingDictionary:
    raw = json.loads(text)
    return {field: {str(cat): int(code) for cat, code in codes.items()} for field, codes in raw.items()}
