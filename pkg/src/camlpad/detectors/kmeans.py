"""Lloyd's k-means with probabilistic farthest-point (squared-distance) seeding.

Deterministic under a fixed seed; empty clusters are reseeded during fitting
to the point lying farthest from its currently assigned centroid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import TooFewRows, as_matrix, check_dimensions

DEFAULT_CLUSTERS = 8
DEFAULT_MAX_ITERATIONS = 100
DEFAULT_TOLERANCE = 1e-6


@dataclass
class KMeansModel:
    centroids: np.ndarray
    inertia: float
    iterations: int
    params: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def n_features(self) -> int:
        return self.centroids.shape[1]

    def to_dict(self) -> dict:
        return {
            "model_version": 1,
            "kind": "kmeans",
            "centroids": self.centroids.tolist(),
            "inertia": self.inertia,
            "iterations": self.iterations,
            "params": dict(self.params),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KMeansModel":
        return cls(
            centroids=np.asarray(data["centroids"], dtype=float),
            inertia=float(data["inertia"]),
            iterations=int(data["iterations"]),
            params=dict(data.get("params", {})),
        )


def squared_distances(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """(n, k) squared Euclidean distances."""
    diff = X[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _seed_centroids(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    closest = ((X - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # remaining points coincide with chosen centroids; fall back to uniform
            choice = int(rng.integers(n))
        else:
            choice = int(rng.choice(n, p=closest / total))
        centroids[i] = X[choice]
        closest = np.minimum(closest, ((X - centroids[i]) ** 2).sum(axis=1))
    return centroids


def _lloyd(
    X: np.ndarray,
    centroids: np.ndarray,
    max_iterations: int,
    tolerance: float,
) -> tuple[np.ndarray, np.ndarray, list[float], int]:
    """Iterate assignment/update; returns (centroids, assignment, inertia trace, iterations)."""
    k = centroids.shape[0]
    inertia_trace: list[float] = []
    assignment = np.zeros(X.shape[0], dtype=int)
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        d2 = squared_distances(X, centroids)
        assignment = d2.argmin(axis=1)
        own = d2[np.arange(X.shape[0]), assignment].copy()
        inertia_trace.append(float(own.sum()))
        updated = centroids.copy()
        for j in range(k):
            members = assignment == j
            if members.any():
                updated[j] = X[members].mean(axis=0)
        empties = [j for j in range(k) if not (assignment == j).any()]
        for j in empties:
            farthest = int(own.argmax())
            updated[j] = X[farthest]
            own[farthest] = -np.inf
        shift = np.sqrt(((updated - centroids) ** 2).sum(axis=1)).max()
        centroids = updated
        if shift <= tolerance and not empties:
            break
    d2 = squared_distances(X, centroids)
    assignment = d2.argmin(axis=1)
    inertia_trace.append(float(d2[np.arange(X.shape[0]), assignment].sum()))
    return centroids, assignment, inertia_trace, iterations


def fit_kmeans(
    data,
    k: int = DEFAULT_CLUSTERS,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    tolerance: float = DEFAULT_TOLERANCE,
    seed: int = 0,
) -> KMeansModel:
    X = as_matrix(data)
    if X.shape[0] < k:
        raise TooFewRows(f"k-means needs >= k={k} rows, got {X.shape[0]}")
    rng = np.random.default_rng(seed)
    centroids = _seed_centroids(X, k, rng)
    centroids, _, trace, iterations = _lloyd(X, centroids, max_iterations, tolerance)
    return KMeansModel(
        centroids=centroids,
        inertia=trace[-1],
        iterations=iterations,
        params={"k": k, "max_iterations": max_iterations, "tolerance": tolerance, "seed": seed},
    )


def assign_clusters(model: KMeansModel, rows) -> np.ndarray:
    X = check_dimensions(model.n_features, np.asarray(rows, dtype=float))
    return squared_distances(X, model.centroids).argmin(axis=1)
