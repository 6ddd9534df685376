"""End-to-end orchestration: ingest, preprocess, fit, score, vote, render, gauge.

Per-source analyses run concurrently; the cross-source vote, combined gauge,
and artifact writes happen after all sources join. Everything written to the
output directory is deterministic for a fixed config and store; only alert
events carry a wall-clock timestamp.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import detectors, ensemble, evaluate, gauge_alert, viz
from .config import DAY_MS, DetectorParams, PipelineConfig, resolve_boundary, window_id_for
from .datamodel import DataSourceKind, RecordBatch, WindowSplit
from .ensemble import DETECTOR_NAMES, LabelVector, ScoreSet
from .errors import CamlpadError
from .ingest_store import StoreQuery, query_store, split_bro_by_protocol, window_split
from .preprocess import conform_columns, encode, impute, standardize

logger = logging.getLogger(__name__)

HEATMAP_MODELS = DETECTOR_NAMES + ("ensemble",)


@dataclass
class SourceAnalysis:
    """Everything one source contributes downstream of detector scoring."""

    source: DataSourceKind
    window_id: str
    row_ids: list[str]
    timestamps: list[int]
    n_history: int
    score_set: ScoreSet
    detector_labels: dict[str, LabelVector]
    ensemble_labels: LabelVector
    ensemble_scores: np.ndarray
    heatmap_points: dict[str, list[viz.HeatmapPoint]]
    history_day_scores: dict[int, float]
    gauge: gauge_alert.GaugeReading

    @property
    def current_slice(self) -> slice:
        return slice(self.n_history, len(self.row_ids))


@dataclass
class RunResult:
    window_id: str
    analyses: dict[DataSourceKind, SourceAnalysis]
    verdicts: list[ensemble.BucketVerdict]
    gauges: list[gauge_alert.GaugeReading]
    alert: gauge_alert.AlertEvent | None = None
    evaluation: dict = field(default_factory=dict)


def analyze_source(
    split: WindowSplit,
    params: DetectorParams,
    contamination: float,
    window_id: str,
) -> SourceAnalysis:
    """Fit the three detectors on the history window and score both windows.

    Encoding dictionary and standardization stats come from history alone and
    are applied to the current window; unseen current-day categories extend
    the dictionary.
    """
    history_raw, dictionary = encode(split.history)
    history_matrix, stats = standardize(impute(history_raw))
    current_raw, _ = encode(split.current, dictionary)
    current_raw = conform_columns(current_raw, history_raw.column_names, history_raw.column_kinds)
    current_matrix, _ = standardize(impute(current_raw), stats)

    iforest_model = detectors.fit_iforest(
        history_matrix,
        trees=params.iforest_trees,
        subsample=params.iforest_subsample,
        seed=params.iforest_seed,
    )
    hbos_model = detectors.fit_hbos(history_matrix, bins=params.hbos_bins)
    cblof_model = detectors.fit_cblof(
        history_matrix,
        k=min(params.cblof_clusters, history_matrix.n_rows),
        alpha=params.cblof_alpha,
        beta=params.cblof_beta,
        seed=params.cblof_seed,
        weighted=params.cblof_weighted,
    )
    pca_model = detectors.fit_pca(history_matrix)

    stacked = np.vstack([history_matrix.values, current_matrix.values])
    row_ids = list(history_matrix.row_ids) + list(current_matrix.row_ids)
    timestamps = [r.timestamp for r in split.history.records] + [
        r.timestamp for r in split.current.records
    ]
    score_set = ScoreSet(
        row_ids=row_ids,
        iforest=detectors.score_iforest_rows(iforest_model, stacked),
        hbos=detectors.score_hbos_rows(hbos_model, stacked),
        cblof=detectors.score_cblof_rows(cblof_model, stacked),
    )
    detector_labels = {
        name: ensemble.binarize(score_set.detector(name), contamination, row_ids)
        for name in DETECTOR_NAMES
    }
    ensemble_labels = ensemble.vote(
        detector_labels["iforest"], detector_labels["hbos"], detector_labels["cblof"]
    )
    ensemble_scores = ensemble.ensemble_score(score_set)

    n_history = history_matrix.n_rows
    shading = {name: ensemble.normalize_scores(score_set.detector(name)) for name in DETECTOR_NAMES}
    shading["ensemble"] = ensemble_scores
    heatmap_points = {
        name: viz.build_heatmap_points(
            pca_model,
            history_matrix,
            current_matrix,
            scores[:n_history],
            scores[n_history:],
        )
        for name, scores in shading.items()
    }

    history_day_scores: dict[int, float] = {}
    day_buckets: dict[int, list[float]] = {}
    for ts, score in zip(timestamps[:n_history], ensemble_scores[:n_history]):
        day_buckets.setdefault((ts // DAY_MS) * DAY_MS, []).append(float(score))
    for day, scores in sorted(day_buckets.items()):
        history_day_scores[day] = gauge_alert.window_score(scores)

    current_score = gauge_alert.window_score(ensemble_scores[n_history:])
    gauge = gauge_alert.GaugeReading(
        scope=split.history.source.value,
        window_id=window_id,
        score=current_score,
        history_percentile=gauge_alert.percentile_rank(
            current_score, list(history_day_scores.values())
        ),
    )
    return SourceAnalysis(
        source=split.history.source,
        window_id=window_id,
        row_ids=row_ids,
        timestamps=timestamps,
        n_history=n_history,
        score_set=score_set,
        detector_labels=detector_labels,
        ensemble_labels=ensemble_labels,
        ensemble_scores=ensemble_scores,
        heatmap_points=heatmap_points,
        history_day_scores=history_day_scores,
        gauge=gauge,
    )


def fetch_batches(config: PipelineConfig, boundary_ms: int) -> dict[DataSourceKind, RecordBatch]:
    """Query one batch per configured source covering history plus current day.

    When run.bro_index is set, the combined BRO index is queried once and
    split by protocol instead of querying bro_dns/bro_conn indexes.
    """
    locator = config.locator()
    time_from = boundary_ms - config.history_days * DAY_MS
    time_to = boundary_ms + DAY_MS
    batches: dict[DataSourceKind, RecordBatch] = {}
    bro_sources = {DataSourceKind.BRO_DNS, DataSourceKind.BRO_CONN}
    wanted = list(config.sources)

    if config.bro_index and any(s in bro_sources for s in wanted):
        combined = query_store(
            locator,
            StoreQuery(index=config.bro_index, time_from=time_from, time_to=time_to),
            DataSourceKind.BRO_CONN,  # placeholder tag; split re-labels records
            config.time_field,
        )
        bro_split = split_bro_by_protocol(combined, config.bro_discriminator)
        if DataSourceKind.BRO_DNS in wanted:
            batches[DataSourceKind.BRO_DNS] = bro_split.dns
        if DataSourceKind.BRO_CONN in wanted:
            batches[DataSourceKind.BRO_CONN] = bro_split.conn
        wanted = [s for s in wanted if s not in bro_sources]

    for source in wanted:
        batches[source] = query_store(
            locator,
            StoreQuery(index=config.index_for(source), time_from=time_from, time_to=time_to),
            source,
            config.time_field,
        )
    return batches


def _combined_gauge(
    analyses: dict[DataSourceKind, SourceAnalysis],
    window_id: str,
) -> gauge_alert.GaugeReading:
    day_buckets: dict[int, list[float]] = {}
    current_scores: list[float] = []
    for analysis in analyses.values():
        for ts, score in zip(
            analysis.timestamps[: analysis.n_history],
            analysis.ensemble_scores[: analysis.n_history],
        ):
            day_buckets.setdefault((ts // DAY_MS) * DAY_MS, []).append(float(score))
        current_scores.extend(float(s) for s in analysis.ensemble_scores[analysis.n_history :])
    day_scores = [gauge_alert.window_score(v) for _, v in sorted(day_buckets.items())]
    score = gauge_alert.window_score(current_scores)
    return gauge_alert.GaugeReading(
        scope=gauge_alert.COMBINED_SCOPE,
        window_id=window_id,
        score=score,
        history_percentile=gauge_alert.percentile_rank(score, day_scores),
    )


def _evaluation_report(analyses: dict[DataSourceKind, SourceAnalysis]) -> dict:
    per_source: dict[str, dict] = {}
    means: list[float] = []
    for source in sorted(analyses, key=lambda s: s.value):
        analysis = analyses[source]
        vectors = {name: analysis.detector_labels[name].labels.tolist() for name in DETECTOR_NAMES}
        pairwise = {
            f"{a}|{b}": evaluate.adjusted_rand_index(vectors[a], vectors[b])
            for i, a in enumerate(DETECTOR_NAMES)
            for b in DETECTOR_NAMES[i + 1 :]
        }
        mean = sum(pairwise.values()) / len(pairwise)
        means.append(mean)
        per_source[source.value] = {"pairwise_ari": pairwise, "mean_pairwise_ari": mean}
    return {
        "per_source": per_source,
        "mean_pairwise_ari": sum(means) / len(means) if means else None,
    }


def write_artifacts(result: RunResult, out_dir: Path) -> None:
    heatmap_dir = out_dir / "heatmaps"
    labels_dir = out_dir / "labels"
    gauges_dir = out_dir / "gauges"
    for directory in (heatmap_dir, labels_dir, gauges_dir):
        directory.mkdir(parents=True, exist_ok=True)

    overall_points: list[viz.HeatmapPoint] = []
    for source in sorted(result.analyses, key=lambda s: s.value):
        analysis = result.analyses[source]
        for model in HEATMAP_MODELS:
            points = analysis.heatmap_points[model]
            spec = viz.PlotSpec(title=f"{source.value} {model} {result.window_id}")
            path = heatmap_dir / f"{source.value}_{model}_{result.window_id}.svg"
            path.write_bytes(viz.render_svg(points, spec))
        overall_points.extend(analysis.heatmap_points["ensemble"])
        (labels_dir / f"{source.value}.jsonl").write_text(
            ensemble.labels_to_jsonl(analysis.ensemble_labels, analysis.detector_labels),
            encoding="utf-8",
        )
    overall_spec = viz.PlotSpec(title=f"combined ensemble {result.window_id}")
    (heatmap_dir / f"combined_ensemble_{result.window_id}.svg").write_bytes(
        viz.render_svg(overall_points, overall_spec)
    )

    (out_dir / "verdicts.jsonl").write_text(
        ensemble.verdicts_to_jsonl(result.verdicts), encoding="utf-8"
    )
    for reading in result.gauges:
        (gauges_dir / f"{reading.scope}_{reading.window_id}.json").write_bytes(
            viz.export_gauge_json(reading)
        )
    (out_dir / "evaluation.json").write_text(
        json.dumps(result.evaluation, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def run_pipeline(config: PipelineConfig, boundary_override: str | None = None) -> RunResult:
    """Execute the full multi-source pipeline and write all artifacts."""
    boundary_ms = resolve_boundary(boundary_override or config.boundary)
    window_id = window_id_for(boundary_ms)
    if not config.sources:
        raise CamlpadError("no sources configured")

    batches = fetch_batches(config, boundary_ms)
    splits = {
        source: window_split(batch, boundary_ms, config.min_history)
        for source, batch in batches.items()
    }

    def job(source: DataSourceKind) -> tuple[DataSourceKind, SourceAnalysis]:
        logger.info("analyzing %s (%d records)", source.value, len(batches[source]))
        try:
            return source, analyze_source(
                splits[source], config.detectors, config.contamination, window_id
            )
        except CamlpadError as exc:
            raise CamlpadError(f"{source.value}: {exc}") from exc

    with ThreadPoolExecutor(max_workers=max(1, len(splits))) as pool:
        analyses = dict(pool.map(job, sorted(splits, key=lambda s: s.value)))

    labeled = {
        source: list(zip(analysis.timestamps, analysis.ensemble_labels.labels.tolist()))
        for source, analysis in analyses.items()
    }
    verdicts = ensemble.cross_source_vote(
        labeled,
        bucket_width_ms=config.bucket_width_ms,
        contamination=config.contamination,
        tie_breaks_anomalous=config.tie_breaks_anomalous,
    )

    combined = _combined_gauge(analyses, window_id)
    gauges = [analyses[s].gauge for s in sorted(analyses, key=lambda s: s.value)] + [combined]

    result = RunResult(
        window_id=window_id,
        analyses=analyses,
        verdicts=verdicts,
        gauges=gauges,
        evaluation=_evaluation_report(analyses),
    )
    write_artifacts(result, config.output_dir)

    locator = config.locator()
    for reading in gauges:
        gauge_alert.reindex_gauge(locator, reading)

    if gauge_alert.alert_decision(combined, config.threshold_percentile):
        event = gauge_alert.build_alert(combined, config.threshold_percentile)
        file_sink = config.alert_file_path()
        webhook = os.environ.get(gauge_alert.WEBHOOK_ENV_VAR) or config.webhook_url or None
        if file_sink is not None or webhook:
            gauge_alert.emit_alert(event, file_path=file_sink, webhook_url=webhook)
        result.alert = event
        logger.warning("alert fired: %s", event.message)
    return result
