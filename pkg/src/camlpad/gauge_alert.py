"""Window-level gauge scores, history-percentile alerting, and gauge re-indexing.

A window's gauge is the mean of its rows' ensemble scores. The current
window's gauge is ranked against the distribution of historical window
gauges; strictly passing the threshold percentile (default 75) fires an
alert. Warm-up windows with no history never alert.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import requests

from .errors import CamlpadError
from .ingest_store import DirectoryStore, StoreLocator, StoreUnreachable

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD_PERCENTILE = 75.0
WEBHOOK_ENV_VAR = "CAMLPAD_WEBHOOK_URL"
WEBHOOK_ATTEMPTS = 3
WEBHOOK_BACKOFF_SECONDS = (1.0, 2.0, 4.0)
GAUGES_INDEX = "gauges"

COMBINED_SCOPE = "combined"


class EmptyWindow(CamlpadError):
    pass


class AllSinksFailed(CamlpadError):
    def __init__(self, outcomes: list["SinkOutcome"]):
        super().__init__("no alert sink succeeded: " + "; ".join(o.detail for o in outcomes))
        self.outcomes = outcomes


class Comparison(str, Enum):
    MORE_ANOMALOUS = "more_anomalous"
    LESS_ANOMALOUS = "less_anomalous"
    EQUAL = "equal"


@dataclass(frozen=True)
class GaugeReading:
    """One window's gauge: scope is a source kind value or "combined"."""

    scope: str
    window_id: str
    score: float
    history_percentile: float | None

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"gauge score must be in [0,1], got {self.score}")
        if self.history_percentile is not None and not 0.0 <= self.history_percentile <= 100.0:
            raise ValueError(f"history_percentile must be in [0,100], got {self.history_percentile}")


@dataclass
class SinkOutcome:
    sink: str
    ok: bool
    detail: str
    attempts: int = 1


@dataclass
class AlertEvent:
    """Built only after alert_decision fired for the reading."""

    fired_at: int
    reading: GaugeReading
    threshold_percentile: float
    message: str
    delivery: list[SinkOutcome] = field(default_factory=list)


def window_score(ensemble_scores: Sequence[float]) -> float:
    """Arithmetic mean of the window's per-row ensemble scores."""
    scores = np.asarray(ensemble_scores, dtype=float)
    if scores.size == 0:
        raise EmptyWindow("cannot score an empty window")
    return float(scores.mean())


def percentile_rank(current: float, history: Sequence[float]) -> float | None:
    """100 * |{h in history : h < current}| / |history|; None when history is empty."""
    history = list(history)
    if not history:
        return None
    below = sum(1 for h in history if h < current)
    return 100.0 * below / len(history)


def alert_decision(reading: GaugeReading, threshold: float = DEFAULT_THRESHOLD_PERCENTILE) -> bool:
    """Fire iff the reading has a percentile and it strictly passes the threshold."""
    if reading.history_percentile is None:
        return False
    return reading.history_percentile > threshold


def compare_recent_previous(recent: float, previous: float) -> Comparison:
    if recent > previous:
        return Comparison.MORE_ANOMALOUS
    if recent < previous:
        return Comparison.LESS_ANOMALOUS
    return Comparison.EQUAL


def _round6(value: float | None) -> float | None:
    return None if value is None else round(float(value), 6)


def gauge_document(reading: GaugeReading) -> dict:
    return {
        "scope": reading.scope,
        "window_id": reading.window_id,
        "score": _round6(reading.score),
        "history_percentile": _round6(reading.history_percentile),
    }


def gauge_json_bytes(reading: GaugeReading) -> bytes:
    """Canonical gauge document: sorted keys, UTF-8, newline-terminated."""
    return (json.dumps(gauge_document(reading), sort_keys=True) + "\n").encode("utf-8")


def alert_document(event: AlertEvent) -> dict:
    return {
        "scope": event.reading.scope,
        "window_id": event.reading.window_id,
        "score": _round6(event.reading.score),
        "history_percentile": _round6(event.reading.history_percentile),
        "threshold": event.threshold_percentile,
        "fired_at": event.fired_at,
    }


def build_alert(
    reading: GaugeReading,
    threshold: float = DEFAULT_THRESHOLD_PERCENTILE,
    fired_at: int | None = None,
) -> AlertEvent:
    if not alert_decision(reading, threshold):
        raise ValueError("alert events are only constructed when the decision fired")
    fired_at = int(time.time() * 1000) if fired_at is None else fired_at
    message = (
        f"{reading.scope} window {reading.window_id}: gauge {reading.score:.6f} "
        f"at percentile {reading.history_percentile:.1f} passed threshold {threshold:g}"
    )
    return AlertEvent(
        fired_at=fired_at,
        reading=reading,
        threshold_percentile=threshold,
        message=message,
    )


def _deliver_file(event: AlertEvent, path: Path) -> SinkOutcome:
    line = json.dumps(alert_document(event), sort_keys=True) + "\n"
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a", encoding="utf-8") as sink:
            sink.write(line)  # single write keeps lines whole under concurrency
        return SinkOutcome(sink=f"file:{path}", ok=True, detail="appended")
    except OSError as exc:
        return SinkOutcome(sink=f"file:{path}", ok=False, detail=str(exc))


def _deliver_webhook(
    event: AlertEvent,
    url: str,
    sleep: Callable[[float], None],
) -> SinkOutcome:
    body = alert_document(event)
    detail = ""
    for attempt in range(1, WEBHOOK_ATTEMPTS + 1):
        try:
            response = requests.post(url, json=body, timeout=30)
            if 200 <= response.status_code < 300:
                return SinkOutcome(
                    sink=f"webhook:{url}", ok=True,
                    detail=f"HTTP {response.status_code}", attempts=attempt,
                )
            detail = f"HTTP {response.status_code}"
        except requests.RequestException as exc:
            detail = str(exc)
        if attempt < WEBHOOK_ATTEMPTS:
            sleep(WEBHOOK_BACKOFF_SECONDS[attempt - 1])
    return SinkOutcome(
        sink=f"webhook:{url}", ok=False,
        detail=f"failed after {WEBHOOK_ATTEMPTS} attempts: {detail}",
        attempts=WEBHOOK_ATTEMPTS,
    )


def emit_alert(
    event: AlertEvent,
    file_path: Path | str | None = None,
    webhook_url: str | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> list[SinkOutcome]:
    """Deliver an alert to the configured sinks; failures never cross sinks.

    CAMLPAD_WEBHOOK_URL in the environment overrides the configured webhook.
    Raises AllSinksFailed only when every configured sink failed.
    """
    webhook_url = os.environ.get(WEBHOOK_ENV_VAR) or webhook_url
    if file_path is None and not webhook_url:
        raise ValueError("emit_alert needs a file path and/or a webhook URL")
    outcomes: list[SinkOutcome] = []
    if file_path is not None:
        outcomes.append(_deliver_file(event, Path(file_path)))
    if webhook_url:
        outcomes.append(_deliver_webhook(event, webhook_url, sleep))
    event.delivery = outcomes
    for outcome in outcomes:
        level = logging.INFO if outcome.ok else logging.WARNING
        logger.log(level, "alert sink %s: %s", outcome.sink, outcome.detail)
    if not any(o.ok for o in outcomes):
        raise AllSinksFailed(outcomes)
    return outcomes


def reindex_gauge(locator: StoreLocator, reading: GaugeReading) -> str:
    """Persist a gauge document into the store's append-only gauges index."""
    payload = gauge_json_bytes(reading)
    if isinstance(locator, DirectoryStore):
        index_dir = locator.root / GAUGES_INDEX
        try:
            index_dir.mkdir(parents=True, exist_ok=True)
            path = index_dir / f"{reading.window_id}.jsonl"
            ordinal = path.read_bytes().count(b"\n") if path.exists() else 0
            with open(path, "ab") as sink:
                sink.write(payload)
        except OSError as exc:
            raise StoreUnreachable(f"cannot write gauge to {index_dir}: {exc}") from None
        return f"{reading.scope}-{reading.window_id}-{ordinal}"
    url = f"{locator.base_url}/{GAUGES_INDEX}/_doc"
    headers = {"Content-Type": "application/json"}
    if locator.token:
        headers["Authorization"] = f"Bearer {locator.token}"
    try:
        response = requests.post(url, data=payload, headers=headers, timeout=30)
    except requests.RequestException as exc:
        raise StoreUnreachable(f"{url}: {exc}") from None
    if response.status_code not in (200, 201):
        raise StoreUnreachable(f"{url}: HTTP {response.status_code}")
    return str(response.json().get("_id", ""))
