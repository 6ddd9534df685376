"""Score normalization, contamination-quantile labeling, and democratic votes.

Two voting layers: a per-row majority over the three detectors within one
source, and a per-time-bucket majority across sources. Exact cross-source
ties resolve toward alerting by default.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .datamodel import DataSourceKind
from .errors import CamlpadError

DEFAULT_CONTAMINATION = 0.1
DEFAULT_BUCKET_WIDTH_MS = 60_000

DETECTOR_NAMES = ("iforest", "hbos", "cblof")


class MisalignedRows(CamlpadError):
    pass


@dataclass
class ScoreSet:
    """Per-detector raw score vectors aligned by row."""

    row_ids: list[str]
    iforest: np.ndarray
    hbos: np.ndarray
    cblof: np.ndarray

    def __post_init__(self) -> None:
        for name in DETECTOR_NAMES:
            vector = np.asarray(getattr(self, name), dtype=float)
            setattr(self, name, vector)
            if vector.shape != (len(self.row_ids),):
                raise ValueError(f"{name} scores misaligned with row_ids")
            if not np.isfinite(vector).all():
                raise ValueError(f"{name} scores contain non-finite values")

    def detector(self, name: str) -> np.ndarray:
        if name not in DETECTOR_NAMES:
            raise KeyError(name)
        return getattr(self, name)


@dataclass
class LabelVector:
    """Binary outlier labels aligned with row_ids (1 = outlier)."""

    row_ids: list[str]
    labels: np.ndarray

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels, dtype=int)
        if self.labels.shape != (len(self.row_ids),):
            raise ValueError("labels misaligned with row_ids")
        if not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")


@dataclass
class BucketVerdict:
    """Cross-source outcome for one fixed-width time bucket."""

    bucket_start: int
    votes: dict[DataSourceKind, int] = field(default_factory=dict)
    final: int = 0


def normalize_scores(scores: np.ndarray) -> np.ndarray:
    """Min-max scale into [0,1]; a constant vector maps to all 0.5."""
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise ValueError("cannot normalize an empty score vector")
    low, high = scores.min(), scores.max()
    if high == low:
        return np.full_like(scores, 0.5)
    return (scores - low) / (high - low)


def binarize(
    scores: np.ndarray,
    contamination: float = DEFAULT_CONTAMINATION,
    row_ids: Sequence[str] | None = None,
) -> LabelVector:
    """Label the top ceil(contamination * n) scores as outliers.

    Ties at the threshold break toward the lower row index, so the outlier
    count is exact for every input.
    """
    scores = np.asarray(scores, dtype=float)
    if not 0.0 < contamination < 1.0:
        raise ValueError(f"contamination must be in (0,1), got {contamination}")
    n = scores.shape[0]
    if n == 0:
        raise ValueError("cannot binarize an empty score vector")
    ids = list(row_ids) if row_ids is not None else [str(i) for i in range(n)]
    if len(ids) != n:
        raise MisalignedRows(f"{len(ids)} row_ids for {n} scores")
    m = math.ceil(contamination * n)
    order = np.argsort(-scores, kind="stable")
    labels = np.zeros(n, dtype=int)
    labels[order[:m]] = 1
    return LabelVector(row_ids=ids, labels=labels)


def vote(a: LabelVector, b: LabelVector, c: LabelVector) -> LabelVector:
    """Per-row majority: outlier iff at least 2 of the 3 detectors agree."""
    if a.row_ids != b.row_ids or a.row_ids != c.row_ids:
        raise MisalignedRows("label vectors do not share row_ids")
    total = a.labels + b.labels + c.labels
    return LabelVector(row_ids=list(a.row_ids), labels=(total >= 2).astype(int))


def ensemble_score(score_set: ScoreSet) -> np.ndarray:
    """Mean of the three min-max-normalized detector vectors, in [0,1]."""
    stacked = np.vstack([
        normalize_scores(score_set.iforest),
        normalize_scores(score_set.hbos),
        normalize_scores(score_set.cblof),
    ])
    return stacked.mean(axis=0)


def cross_source_vote(
    labeled: Mapping[DataSourceKind, Sequence[tuple[int, int]]],
    bucket_width_ms: int = DEFAULT_BUCKET_WIDTH_MS,
    contamination: float = DEFAULT_CONTAMINATION,
    tie_breaks_anomalous: bool = True,
) -> list[BucketVerdict]:
    """Democratic vote across sources per fixed-width time bucket.

    ``labeled`` maps each source to its (timestamp_ms, label) pairs. A source
    votes 1 in a bucket iff its outlier fraction there exceeds the
    contamination rate; the bucket verdict is a strict majority of the
    sources present, exact ties resolving to 1 unless configured otherwise.
    """
    if not labeled:
        raise ValueError("cross_source_vote needs at least one source")
    if bucket_width_ms <= 0:
        raise ValueError("bucket_width_ms must be positive")
    counts: dict[int, dict[DataSourceKind, list[int]]] = {}
    for source, rows in labeled.items():
        for timestamp, label in rows:
            bucket = (timestamp // bucket_width_ms) * bucket_width_ms
            pair = counts.setdefault(bucket, {}).setdefault(source, [0, 0])
            pair[0] += 1
            pair[1] += int(label)
    verdicts: list[BucketVerdict] = []
    for bucket in sorted(counts):
        votes: dict[DataSourceKind, int] = {}
        for source, (total, outliers) in counts[bucket].items():
            votes[source] = 1 if outliers / total > contamination else 0
        present = len(votes)
        ones = sum(votes.values())
        if ones * 2 > present:
            final = 1
        elif ones * 2 == present:
            final = 1 if tie_breaks_anomalous else 0
        else:
            final = 0
        verdicts.append(BucketVerdict(bucket_start=bucket, votes=votes, final=final))
    return verdicts


def labels_to_jsonl(
    ensemble_labels: LabelVector,
    detector_labels: Mapping[str, LabelVector],
) -> str:
    """One {"row_id", "label", "votes"} JSON object per row."""
    for name, vector in detector_labels.items():
        if vector.row_ids != ensemble_labels.row_ids:
            raise MisalignedRows(f"detector {name} labels misaligned with ensemble labels")
    lines = []
    for i, row_id in enumerate(ensemble_labels.row_ids):
        doc = {
            "row_id": row_id,
            "label": int(ensemble_labels.labels[i]),
            "votes": {name: int(vec.labels[i]) for name, vec in sorted(detector_labels.items())},
        }
        lines.append(json.dumps(doc, sort_keys=True))
    return "\n".join(lines) + "\n" if lines else ""


def verdicts_to_jsonl(verdicts: Sequence[BucketVerdict]) -> str:
    """One {"bucket_start", "final", "votes"} JSON object per bucket."""
    lines = []
    for verdict in verdicts:
        doc = {
            "bucket_start": verdict.bucket_start,
            "final": verdict.final,
            "votes": {source.value: flag for source, flag in sorted(verdict.votes.items())},
        }
        lines.append(json.dumps(doc, sort_keys=True))
    return "\n".join(lines) + "\n" if lines else ""
