"""Cluster-based local outlier factor over a k-means partition.

Clusters are split into large and small by the size rules: walking sizes in
descending order, the boundary is the first index where the cumulative size
reaches alpha*n or where the size ratio to the next cluster reaches beta.
A row in a large cluster scores its distance to that centroid; a row in a
small cluster scores its distance to the nearest large centroid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import TooFewRows, as_matrix, check_dimensions
from .kmeans import (
    DEFAULT_CLUSTERS,
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_TOLERANCE,
    KMeansModel,
    fit_kmeans,
    squared_distances,
)

DEFAULT_ALPHA = 0.9
DEFAULT_BETA = 5.0


@dataclass
class CblofModel:
    kmeans: KMeansModel
    cluster_sizes: np.ndarray
    large_flags: np.ndarray
    weighted: bool = False
    params: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return self.kmeans.n_features

    def to_dict(self) -> dict:
        return {
            "model_version": 1,
            "kind": "cblof",
            "kmeans": self.kmeans.to_dict(),
            "cluster_sizes": self.cluster_sizes.tolist(),
            "large_flags": self.large_flags.tolist(),
            "weighted": self.weighted,
            "params": dict(self.params),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CblofModel":
        return cls(
            kmeans=KMeansModel.from_dict(data["kmeans"]),
            cluster_sizes=np.asarray(data["cluster_sizes"], dtype=int),
            large_flags=np.asarray(data["large_flags"], dtype=bool),
            weighted=bool(data["weighted"]),
            params=dict(data.get("params", {})),
        )


def large_cluster_flags(sizes: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    """Apply the alpha/beta boundary rule; at least one cluster is always large."""
    sizes = np.asarray(sizes)
    n = int(sizes.sum())
    order = np.argsort(-sizes, kind="stable")
    flags = np.zeros(len(sizes), dtype=bool)
    cumulative = 0
    boundary = len(order) - 1
    for i, cluster in enumerate(order):
        cumulative += int(sizes[cluster])
        if cumulative >= alpha * n:
            boundary = i
            break
        if i + 1 < len(order) and sizes[cluster] >= beta * sizes[order[i + 1]]:
            boundary = i
            break
    flags[order[: boundary + 1]] = True
    return flags


def fit_cblof(
    data,
    k: int = DEFAULT_CLUSTERS,
    alpha: float = DEFAULT_ALPHA,
    beta: float = DEFAULT_BETA,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    tolerance: float = DEFAULT_TOLERANCE,
    seed: int = 0,
    weighted: bool = False,
) -> CblofModel:
    X = as_matrix(data)
    if X.shape[0] < k:
        raise TooFewRows(f"cblof needs >= k={k} rows, got {X.shape[0]}")
    if not (0.5 < alpha <= 1.0):
        raise ValueError(f"alpha must be in (0.5, 1], got {alpha}")
    if beta < 1.0:
        raise ValueError(f"beta must be >= 1, got {beta}")
    kmeans = fit_kmeans(X, k=k, max_iterations=max_iterations, tolerance=tolerance, seed=seed)
    assignment = squared_distances(X, kmeans.centroids).argmin(axis=1)
    sizes = np.bincount(assignment, minlength=k)
    flags = large_cluster_flags(sizes, alpha, beta)
    return CblofModel(
        kmeans=kmeans,
        cluster_sizes=sizes,
        large_flags=flags,
        weighted=weighted,
        params={"k": k, "alpha": alpha, "beta": beta, "seed": seed, "weighted": weighted},
    )


def score_cblof_rows(model: CblofModel, rows) -> np.ndarray:
    """Distance to the owning large centroid, or to the nearest large centroid
    for rows assigned to small clusters. The weighted variant multiplies by
    the owning cluster's size."""
    X = check_dimensions(model.n_features, np.asarray(rows, dtype=float))
    d2 = squared_distances(X, model.kmeans.centroids)
    assignment = d2.argmin(axis=1)
    own_distance = np.sqrt(d2[np.arange(X.shape[0]), assignment])
    large_distance = np.sqrt(d2[:, model.large_flags].min(axis=1))
    scores = np.where(model.large_flags[assignment], own_distance, large_distance)
    if model.weighted:
        scores = scores * model.cluster_sizes[assignment]
    return scores


def score_cblof(model: CblofModel, row) -> float:
    return float(score_cblof_rows(model, np.asarray(row, dtype=float))[0])
