"""Two-component PCA used to place rows on the heatmap plane.

Components come from an eigendecomposition of the mean-centered covariance;
the sign of each component is fixed so its largest-magnitude coordinate is
positive, which keeps rendered plots stable across linear-algebra backends.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import TooFewRows, as_matrix, check_dimensions


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (2, d); second row is all-zero when d == 1
    explained_variance: np.ndarray

    @property
    def n_features(self) -> int:
        return self.mean.shape[0]

    def to_dict(self) -> dict:
        return {
            "model_version": 1,
            "kind": "pca",
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PcaModel":
        return cls(
            mean=np.asarray(data["mean"], dtype=float),
            components=np.asarray(data["components"], dtype=float),
            explained_variance=np.asarray(data["explained_variance"], dtype=float),
        )


def _fix_sign(component: np.ndarray) -> np.ndarray:
    pivot = int(np.abs(component).argmax())
    return -component if component[pivot] < 0 else component


def fit_pca(data) -> PcaModel:
    X = as_matrix(data)
    n, d = X.shape
    if n < 2:
        raise TooFewRows(f"pca needs >= 2 rows, got {n}")
    if d < 1:
        raise ValueError("pca needs at least one column")
    mean = X.mean(axis=0)
    centered = X - mean
    if d == 1:
        variance = float((centered[:, 0] ** 2).sum() / (n - 1))
        components = np.asarray([[1.0], [0.0]])
        explained = np.asarray([variance, 0.0])
        return PcaModel(mean=mean, components=components, explained_variance=explained)
    covariance = centered.T @ centered / (n - 1)
    eigenvalues, eigenvectors = np.linalg.eigh(covariance)
    top = np.argsort(eigenvalues)[::-1][:2]
    components = np.vstack([_fix_sign(eigenvectors[:, i]) for i in top])
    explained = np.maximum(eigenvalues[top], 0.0)
    return PcaModel(mean=mean, components=components, explained_variance=explained)


def project_pca_rows(model: PcaModel, rows) -> np.ndarray:
    """(n, 2) coordinates: components applied to mean-centered rows."""
    X = check_dimensions(model.n_features, np.asarray(rows, dtype=float))
    return (X - model.mean) @ model.components.T


def project_pca(model: PcaModel, row) -> tuple[float, float]:
    xy = project_pca_rows(model, np.asarray(row, dtype=float))[0]
    return float(xy[0]), float(xy[1])
