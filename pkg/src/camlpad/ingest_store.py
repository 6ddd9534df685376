"""Read sensor logs from a document store, split BRO by protocol, window them.

Two store backends speak the same contract: a directory of ``.jsonl`` files
(one subdirectory per index) and a minimal HTTP search API
(``POST {base}/{index}/_search`` with a range query and from/size paging).
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import NamedTuple

import requests

from .datamodel import (
    MISSING,
    Category,
    DataSourceKind,
    FieldValue,
    Number,
    RecordBatch,
    SensorRecord,
    WindowSplit,
    derive_record_id,
)
from .errors import CamlpadError

logger = logging.getLogger(__name__)

DEFAULT_TIME_FIELD = "timestamp"
DEFAULT_MIN_HISTORY = 50
DEFAULT_DISCRIMINATOR = "log_type"


class MalformedLine(CamlpadError):
    def __init__(self, line_number: int, reason: str):
        super().__init__(f"line {line_number}: {reason}")
        self.line_number = line_number


class MissingTimestamp(CamlpadError):
    def __init__(self, line_number: int, time_field: str):
        super().__init__(f"line {line_number}: time field {time_field!r} absent or unparseable")
        self.line_number = line_number


class HeaderMissing(CamlpadError):
    pass


class DiscriminatorMissing(CamlpadError):
    pass


class StoreUnreachable(CamlpadError):
    pass


class IndexNotFound(CamlpadError):
    def __init__(self, index: str):
        super().__init__(f"index not found: {index}")
        self.index = index


class PageFailure(CamlpadError):
    def __init__(self, records_so_far: int, reason: str):
        super().__init__(f"page failure after {records_so_far} records: {reason}")
        self.records_so_far = records_so_far


class EmptyCurrent(CamlpadError):
    pass


class EmptyHistory(CamlpadError):
    pass


@dataclass(frozen=True)
class StoreQuery:
    """Time-range query against one index, with paging limits."""

    index: str
    time_from: int
    time_to: int
    page_size: int = 500
    max_records: int = 1_000_000

    def __post_init__(self) -> None:
        if self.time_from >= self.time_to:
            raise ValueError(f"time_from {self.time_from} must be < time_to {self.time_to}")
        if self.page_size <= 0 or self.max_records <= 0:
            raise ValueError("page_size and max_records must be positive")
        if self.page_size > self.max_records:
            raise ValueError("page_size must be <= max_records")


@dataclass(frozen=True)
class DirectoryStore:
    """Index = subdirectory of .jsonl files under ``root``."""

    root: Path

    def __post_init__(self) -> None:
        object.__setattr__(self, "root", Path(self.root))


@dataclass(frozen=True)
class HttpStore:
    """Minimal search-API backend; token sent as a Bearer header when set."""

    base_url: str
    token: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "base_url", self.base_url.rstrip("/"))


StoreLocator = DirectoryStore | HttpStore


def to_epoch_ms(value: object) -> int | None:
    """Normalize a raw time value to epoch milliseconds UTC, or None."""
    if isinstance(value, bool) or value is None:
        return None
    if isinstance(value, (int, float)):
        if not math.isfinite(float(value)):
            return None
        return int(value)
    if isinstance(value, str):
        text = value.strip()
        try:
            return int(float(text))
        except ValueError:
            pass
        try:
            parsed = datetime.fromisoformat(text.replace("Z", "+00:00"))
        except ValueError:
            return None
        if parsed.tzinfo is None:
            parsed = parsed.replace(tzinfo=timezone.utc)
        return int(parsed.timestamp() * 1000)
    return None


def _field_value(raw: object) -> FieldValue:
    if raw is None:
        return MISSING
    if isinstance(raw, bool):
        return Category("true" if raw else "false")
    if isinstance(raw, (int, float)):
        # json.loads admits NaN/Infinity; treat them as absent data
        if not math.isfinite(float(raw)):
            return MISSING
        return Number(float(raw))
    if isinstance(raw, str):
        return Category(raw) if raw else MISSING
    return Category(json.dumps(raw, sort_keys=True))


def _unique_id(base: str, taken: set[str]) -> str:
    rid, n = base, 1
    while rid in taken:
        rid = f"{base}-{n}"
        n += 1
    taken.add(rid)
    return rid


def parse_jsonl(
    data: bytes | str,
    source: DataSourceKind,
    time_field: str = DEFAULT_TIME_FIELD,
) -> RecordBatch:
    """One SensorRecord per non-empty JSONL line.

    Numbers map to Number, strings to Category, null to Missing. The time
    field is extracted and removed from the feature fields; a document-level
    ``_id`` becomes the record id, otherwise one is derived.
    """
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    records: list[SensorRecord] = []
    taken: set[str] = set()
    for line_number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedLine(line_number, str(exc)) from None
        if not isinstance(doc, dict):
            raise MalformedLine(line_number, "expected a JSON object")
        records.append(_record_from_document(doc, source, time_field, line_number, taken))
    return RecordBatch(source=source, records=tuple(records))


def _record_from_document(
    doc: dict,
    source: DataSourceKind,
    time_field: str,
    line_number: int,
    taken: set[str],
) -> SensorRecord:
    if time_field not in doc:
        raise MissingTimestamp(line_number, time_field)
    timestamp = to_epoch_ms(doc[time_field])
    if timestamp is None:
        raise MissingTimestamp(line_number, time_field)
    store_id = doc.get("_id")
    fields = {
        name: _field_value(raw)
        for name, raw in doc.items()
        if name != time_field and name != "_id"
    }
    if store_id is not None:
        record_id = _unique_id(str(store_id), taken)
    else:
        record_id = _unique_id(derive_record_id(source, timestamp, fields), taken)
    return SensorRecord(source=source, timestamp=timestamp, fields=fields, record_id=record_id)


def parse_csv(
    data: bytes | str,
    source: DataSourceKind,
    time_column: str,
) -> RecordBatch:
    """RFC-4180 CSV with a header row; the time column becomes the timestamp.

    Cells parseable as finite reals map to Number, empty cells to Missing,
    everything else to Category.
    """
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise HeaderMissing("empty input, no header row") from None
    if time_column not in header:
        raise HeaderMissing(f"time column {time_column!r} not in header {header}")
    time_idx = header.index(time_column)

    records: list[SensorRecord] = []
    taken: set[str] = set()
    for row_number, row in enumerate(reader, start=2):
        if not row or all(cell == "" for cell in row):
            continue
        if time_idx >= len(row):
            raise MissingTimestamp(row_number, time_column)
        timestamp = to_epoch_ms(row[time_idx])
        if timestamp is None:
            raise MissingTimestamp(row_number, time_column)
        fields: dict[str, FieldValue] = {}
        for idx, name in enumerate(header):
            if idx == time_idx:
                continue
            cell = row[idx] if idx < len(row) else ""
            fields[name] = _csv_value(cell)
        record_id = _unique_id(derive_record_id(source, timestamp, fields), taken)
        records.append(
            SensorRecord(source=source, timestamp=timestamp, fields=fields, record_id=record_id)
        )
    return RecordBatch(source=source, records=tuple(records), schema=tuple(c for c in header if c != time_column))


def _csv_value(cell: str) -> FieldValue:
    if cell == "":
        return MISSING
    try:
        number = float(cell)
    except ValueError:
        return Category(cell)
    if math.isfinite(number):
        return Number(number)
    return Category(cell)


def record_to_document(record: SensorRecord, time_field: str = DEFAULT_TIME_FIELD) -> dict:
    """JSON-document form of a record; inverse of the parse_jsonl rules."""
    doc: dict[str, object] = {"_id": record.record_id, time_field: record.timestamp}
    for name, value in record.fields.items():
        if isinstance(value, Number):
            doc[name] = value.value
        elif isinstance(value, Category):
            doc[name] = value.text
        else:
            doc[name] = None
    return doc


def record_to_json_line(record: SensorRecord, time_field: str = DEFAULT_TIME_FIELD) -> str:
    return json.dumps(record_to_document(record, time_field), separators=(",", ":"))


class BroSplit(NamedTuple):
    dns: RecordBatch
    conn: RecordBatch
    dropped: int


def split_bro_by_protocol(
    batch: RecordBatch,
    discriminator: str = DEFAULT_DISCRIMINATOR,
    dns_value: str = "dns",
    conn_value: str = "conn",
) -> BroSplit:
    """Partition a raw BRO batch into DNS and CONN batches by log type.

    Records whose discriminator value is neither recognized value are dropped
    and counted; real BRO emits many log types beyond these two.
    """
    if len(batch) > 0 and discriminator not in batch.schema:
        raise DiscriminatorMissing(f"discriminator field {discriminator!r} absent from batch schema")
    dns_records: list[SensorRecord] = []
    conn_records: list[SensorRecord] = []
    dropped = 0
    for record in batch.records:
        value = record.fields.get(discriminator, MISSING)
        label = value.text if isinstance(value, Category) else None
        if label == dns_value:
            dns_records.append(_resourced(record, DataSourceKind.BRO_DNS))
        elif label == conn_value:
            conn_records.append(_resourced(record, DataSourceKind.BRO_CONN))
        else:
            dropped += 1
    if dropped:
        logger.info("split_bro_by_protocol dropped %d records with unknown %r", dropped, discriminator)
    return BroSplit(
        dns=RecordBatch(source=DataSourceKind.BRO_DNS, records=tuple(dns_records)),
        conn=RecordBatch(source=DataSourceKind.BRO_CONN, records=tuple(conn_records)),
        dropped=dropped,
    )


def _resourced(record: SensorRecord, source: DataSourceKind) -> SensorRecord:
    return SensorRecord(
        source=source,
        timestamp=record.timestamp,
        fields=dict(record.fields),
        record_id=record.record_id,
    )


def query_store(
    locator: StoreLocator,
    query: StoreQuery,
    source: DataSourceKind,
    time_field: str = DEFAULT_TIME_FIELD,
) -> RecordBatch:
    """All records with time_from <= t < time_to, up to max_records.

    Results are in canonical ascending (timestamp, record_id) order. Partial
    results are never returned silently: any page failure raises.
    """
    if isinstance(locator, DirectoryStore):
        records = _query_directory(locator, query, source, time_field)
    else:
        records = _query_http(locator, query, source, time_field)
    records.sort(key=lambda r: (r.timestamp, r.record_id))
    return RecordBatch(source=source, records=tuple(records[: query.max_records]))


def _query_directory(
    store: DirectoryStore,
    query: StoreQuery,
    source: DataSourceKind,
    time_field: str,
) -> list[SensorRecord]:
    if not store.root.is_dir():
        raise StoreUnreachable(f"store root does not exist: {store.root}")
    index_dir = store.root / query.index
    if not index_dir.is_dir():
        raise IndexNotFound(query.index)
    records: list[SensorRecord] = []
    for path in sorted(index_dir.glob("*.jsonl")):
        batch = parse_jsonl(path.read_bytes(), source, time_field)
        records.extend(
            r for r in batch.records if query.time_from <= r.timestamp < query.time_to
        )
    return records


def _query_http(
    store: HttpStore,
    query: StoreQuery,
    source: DataSourceKind,
    time_field: str,
) -> list[SensorRecord]:
    url = f"{store.base_url}/{query.index}/_search"
    headers = {}
    if store.token:
        headers["Authorization"] = f"Bearer {store.token}"
    records: list[SensorRecord] = []
    taken: set[str] = set()
    offset = 0
    while len(records) < query.max_records:
        body = {
            "range": {time_field: {"gte": query.time_from, "lt": query.time_to}},
            "from": offset,
            "size": query.page_size,
        }
        try:
            response = requests.post(url, json=body, headers=headers, timeout=30)
        except requests.RequestException as exc:
            raise StoreUnreachable(f"{url}: {exc}") from None
        if response.status_code == 404:
            raise IndexNotFound(query.index)
        if response.status_code != 200:
            raise PageFailure(len(records), f"HTTP {response.status_code} at offset {offset}")
        try:
            hits = response.json()["hits"]
        except (ValueError, KeyError) as exc:
            raise PageFailure(len(records), f"bad response body: {exc}") from None
        for position, hit in enumerate(hits):
            doc = dict(hit.get("_source", {}))
            if "_id" in hit:
                doc["_id"] = hit["_id"]
            records.append(_record_from_document(doc, source, time_field, offset + position + 1, taken))
        if len(hits) < query.page_size:
            break
        offset += len(hits)
    return records


def window_split(
    batch: RecordBatch,
    boundary: int,
    min_history: int = DEFAULT_MIN_HISTORY,
) -> WindowSplit:
    """Partition a batch at a boundary: history t < boundary, current t >= boundary.

    Input order is preserved on both sides. Scoring with no current rows or
    too little history is meaningless, so both degenerate cases raise.
    """
    history = [r for r in batch.records if r.timestamp < boundary]
    current = [r for r in batch.records if r.timestamp >= boundary]
    if not current:
        raise EmptyCurrent(f"no records at or after boundary {boundary} for {batch.source.value}")
    if len(history) < min_history:
        raise EmptyHistory(
            f"{len(history)} history records before boundary {boundary} for {batch.source.value}, need {min_history}"
        )
    return WindowSplit(
        history=RecordBatch(source=batch.source, records=tuple(history), schema=batch.schema),
        current=RecordBatch(source=batch.source, records=tuple(current), schema=batch.schema),
        boundary=boundary,
    )
