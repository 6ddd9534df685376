"""Flat key=value pipeline configuration with dotted section prefixes.

The format is line-oriented and diff-friendly: blank lines and ``#`` comments
are ignored, everything else is ``section.key = value``. Unknown keys are
rejected so typos fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .datamodel import DataSourceKind
from .ensemble import DEFAULT_BUCKET_WIDTH_MS, DEFAULT_CONTAMINATION
from .errors import CamlpadError
from .gauge_alert import DEFAULT_THRESHOLD_PERCENTILE
from .ingest_store import (
    DEFAULT_DISCRIMINATOR,
    DEFAULT_MIN_HISTORY,
    DEFAULT_TIME_FIELD,
    DirectoryStore,
    HttpStore,
    StoreLocator,
)

DAY_MS = 86_400_000


class ConfigError(CamlpadError):
    pass


@dataclass
class DetectorParams:
    iforest_trees: int = 100
    iforest_subsample: int = 256
    iforest_seed: int = 7
    hbos_bins: int = 10
    cblof_clusters: int = 8
    cblof_alpha: float = 0.9
    cblof_beta: float = 5.0
    cblof_seed: int = 7
    cblof_weighted: bool = False


@dataclass
class PipelineConfig:
    store_kind: str = "directory"
    store_root: Path = Path("./store")
    store_url: str = ""
    store_token: str = ""
    sources: list[DataSourceKind] = field(default_factory=lambda: list(DataSourceKind))
    indexes: dict[DataSourceKind, str] = field(default_factory=dict)
    bro_index: str = ""
    bro_discriminator: str = DEFAULT_DISCRIMINATOR
    time_field: str = DEFAULT_TIME_FIELD
    boundary: str = "today"
    history_days: int = 7
    min_history: int = DEFAULT_MIN_HISTORY
    contamination: float = DEFAULT_CONTAMINATION
    bucket_width_ms: int = DEFAULT_BUCKET_WIDTH_MS
    threshold_percentile: float = DEFAULT_THRESHOLD_PERCENTILE
    tie_breaks_anomalous: bool = True
    output_dir: Path = Path("./out")
    alert_file: str = "alerts.jsonl"
    webhook_url: str = ""
    detectors: DetectorParams = field(default_factory=DetectorParams)

    def index_for(self, source: DataSourceKind) -> str:
        return self.indexes.get(source, source.value)

    def locator(self) -> StoreLocator:
        if self.store_kind == "directory":
            return DirectoryStore(root=self.store_root)
        if self.store_kind == "http":
            if not self.store_url:
                raise ConfigError("store.kind is http but store.url is empty")
            return HttpStore(base_url=self.store_url, token=self.store_token or None)
        raise ConfigError(f"store.kind must be 'directory' or 'http', got {self.store_kind!r}")

    def alert_file_path(self) -> Path | None:
        if not self.alert_file:
            return None
        path = Path(self.alert_file)
        return path if path.is_absolute() else self.output_dir / path


def parse_config_text(text: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_number}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        entries[key.strip()] = value.strip()
    return entries


def _to_bool(key: str, value: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _to_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None


def _to_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None


def config_from_entries(entries: dict[str, str]) -> PipelineConfig:
    config = PipelineConfig()
    detectors = config.detectors
    setters = {
        "store.kind": lambda v: setattr(config, "store_kind", v),
        "store.root": lambda v: setattr(config, "store_root", Path(v)),
        "store.url": lambda v: setattr(config, "store_url", v),
        "store.token": lambda v: setattr(config, "store_token", v),
        "run.sources": lambda v: setattr(
            config, "sources", [DataSourceKind.from_name(s) for s in v.split(",") if s.strip()]
        ),
        "run.time_field": lambda v: setattr(config, "time_field", v),
        "run.boundary": lambda v: setattr(config, "boundary", v),
        "run.history_days": lambda v: setattr(config, "history_days", _to_int("run.history_days", v)),
        "run.min_history": lambda v: setattr(config, "min_history", _to_int("run.min_history", v)),
        "run.contamination": lambda v: setattr(config, "contamination", _to_float("run.contamination", v)),
        "run.bucket_width_ms": lambda v: setattr(config, "bucket_width_ms", _to_int("run.bucket_width_ms", v)),
        "run.threshold_percentile": lambda v: setattr(
            config, "threshold_percentile", _to_float("run.threshold_percentile", v)
        ),
        "run.tie_breaks_anomalous": lambda v: setattr(
            config, "tie_breaks_anomalous", _to_bool("run.tie_breaks_anomalous", v)
        ),
        "run.output_dir": lambda v: setattr(config, "output_dir", Path(v)),
        "run.bro_index": lambda v: setattr(config, "bro_index", v),
        "run.bro_discriminator": lambda v: setattr(config, "bro_discriminator", v),
        "alerts.file": lambda v: setattr(config, "alert_file", v),
        "alerts.webhook_url": lambda v: setattr(config, "webhook_url", v),
        "detectors.iforest.trees": lambda v: setattr(detectors, "iforest_trees", _to_int("detectors.iforest.trees", v)),
        "detectors.iforest.subsample": lambda v: setattr(
            detectors, "iforest_subsample", _to_int("detectors.iforest.subsample", v)
        ),
        "detectors.iforest.seed": lambda v: setattr(detectors, "iforest_seed", _to_int("detectors.iforest.seed", v)),
        "detectors.hbos.bins": lambda v: setattr(detectors, "hbos_bins", _to_int("detectors.hbos.bins", v)),
        "detectors.cblof.clusters": lambda v: setattr(
            detectors, "cblof_clusters", _to_int("detectors.cblof.clusters", v)
        ),
        "detectors.cblof.alpha": lambda v: setattr(detectors, "cblof_alpha", _to_float("detectors.cblof.alpha", v)),
        "detectors.cblof.beta": lambda v: setattr(detectors, "cblof_beta", _to_float("detectors.cblof.beta", v)),
        "detectors.cblof.seed": lambda v: setattr(detectors, "cblof_seed", _to_int("detectors.cblof.seed", v)),
        "detectors.cblof.weighted": lambda v: setattr(
            detectors, "cblof_weighted", _to_bool("detectors.cblof.weighted", v)
        ),
    }
    for key, value in entries.items():
        if key.startswith("sources.") and key.endswith(".index"):
            source = DataSourceKind.from_name(key.split(".")[1])
            config.indexes[source] = value
            continue
        if key not in setters:
            raise ConfigError(f"unknown config key: {key}")
        setters[key](value)
    if not 0.0 < config.contamination < 1.0:
        raise ConfigError(f"run.contamination must be in (0,1), got {config.contamination}")
    return config


def load_config(path: Path | str) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return config_from_entries(parse_config_text(path.read_text(encoding="utf-8")))


def resolve_boundary(value: str) -> int:
    """Epoch ms for a boundary: 'today' (UTC midnight) or an ISO date/datetime."""
    if value.strip().lower() == "today":
        now = datetime.now(timezone.utc)
        midnight = now.replace(hour=0, minute=0, second=0, microsecond=0)
        return int(midnight.timestamp() * 1000)
    try:
        parsed = datetime.fromisoformat(value.strip().replace("Z", "+00:00"))
    except ValueError:
        raise ConfigError(f"boundary must be 'today' or an ISO date, got {value!r}") from None
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return int(parsed.timestamp() * 1000)


def window_id_for(boundary_ms: int) -> str:
    return datetime.fromtimestamp(boundary_ms / 1000, tz=timezone.utc).date().isoformat()
