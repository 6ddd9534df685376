"""Shared errors and input checks for the detector implementations."""

from __future__ import annotations

import numpy as np

from ..errors import CamlpadError


class TooFewRows(CamlpadError):
    pass


class DimensionMismatch(CamlpadError):
    pass


def as_matrix(data) -> np.ndarray:
    """Accept a FeatureMatrix or a raw 2-D array; detectors only see floats."""
    values = getattr(data, "values", data)
    array = np.asarray(values, dtype=float)
    if array.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {array.shape}")
    if np.isnan(array).any():
        raise ValueError("detector input contains missing values; impute first")
    return array


def check_dimensions(expected: int, row_or_matrix: np.ndarray) -> np.ndarray:
    array = np.asarray(row_or_matrix, dtype=float)
    if array.ndim == 1:
        array = array[None, :]
    if array.shape[1] != expected:
        raise DimensionMismatch(f"model expects {expected} features, got {array.shape[1]}")
    return array
