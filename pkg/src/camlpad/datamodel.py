"""Canonical record and dataset types shared by every pipeline stage.

All types here are immutable after construction and safe to share between
threads. Serialization to/from the store's JSON form lives in
:mod:`camlpad.ingest_store`.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

from .errors import CamlpadError


class DataSourceKind(str, Enum):
    """The five supported log sources. BRO is always split by protocol."""

    BRO_DNS = "bro_dns"
    BRO_CONN = "bro_conn"
    YAF = "yaf"
    SNORT = "snort"
    MERAKI = "meraki"

    @classmethod
    def from_name(cls, name: str) -> "DataSourceKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise CamlpadError(f"unknown data source kind: {name!r}") from None


@dataclass(frozen=True)
class Missing:
    """Absent field value; survives encoding, eliminated by imputation."""


@dataclass(frozen=True)
class Number:
    """Finite numeric field value. NaN/inf are never admitted at parse time."""

    value: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", float(self.value))
        if not math.isfinite(self.value):
            raise ValueError(f"Number must be finite, got {self.value!r}")


@dataclass(frozen=True)
class Category:
    """Non-empty categorical field value (pre-encoding)."""

    text: str

    def __post_init__(self) -> None:
        if not isinstance(self.text, str) or not self.text:
            raise ValueError("Category text must be a non-empty string")


FieldValue = Missing | Number | Category

MISSING = Missing()


@dataclass(frozen=True)
class SensorRecord:
    """One timestamped log event from one source kind.

    ``timestamp`` is epoch milliseconds UTC regardless of the source's native
    time format. ``fields`` preserves first-seen order; the time field itself
    is never part of ``fields``.
    """

    source: DataSourceKind
    timestamp: int
    fields: dict[str, FieldValue]
    record_id: str

    def __post_init__(self) -> None:
        if self.timestamp < 0:
            raise ValueError(f"timestamp must be >= 0, got {self.timestamp}")
        if not self.record_id:
            raise ValueError("record_id must be non-empty")


def derive_record_id(source: DataSourceKind, timestamp: int, fields: Mapping[str, FieldValue]) -> str:
    """Stable id for records the store did not assign one to.

    Hash of (source, timestamp, serialized fields); callers are responsible
    for de-duplicating byte-identical records within a batch.
    """
    payload: list[object] = [source.value, timestamp]
    for name, value in fields.items():
        if isinstance(value, Missing):
            payload.append([name, None])
        elif isinstance(value, Number):
            payload.append([name, value.value])
        else:
            payload.append([name, value.text])
    digest = hashlib.sha1(json.dumps(payload, separators=(",", ":")).encode("utf-8"))
    return digest.hexdigest()[:16]


@dataclass(frozen=True)
class RecordBatch:
    """A sequence of records from a single source plus the union schema.

    ``schema`` lists every field name appearing in any record, in first-seen
    order across the batch. It is derived automatically when omitted.
    """

    source: DataSourceKind
    records: tuple[SensorRecord, ...]
    schema: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        if not self.schema:
            object.__setattr__(self, "schema", union_schema(self.records))
        else:
            object.__setattr__(self, "schema", tuple(self.schema))

    def __len__(self) -> int:
        return len(self.records)


def union_schema(records: Iterable[SensorRecord]) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for record in records:
        for name in record.fields:
            seen.setdefault(name)
    return tuple(seen)


def validate_batch(batch: RecordBatch) -> list[str]:
    """Check RecordBatch invariants; one entry per violation, empty when clean.

    Violations are data, not failures: callers decide whether to proceed.
    """
    violations: list[str] = []
    seen_ids: set[str] = set()
    schema = set(batch.schema)
    for record in batch.records:
        if record.source is not batch.source:
            violations.append(
                f"record {record.record_id}: source {record.source.value} != batch source {batch.source.value}"
            )
        if record.record_id in seen_ids:
            violations.append(f"record {record.record_id}: duplicate record_id")
        seen_ids.add(record.record_id)
        for name in record.fields:
            if name not in schema:
                violations.append(f"record {record.record_id}: field {name!r} missing from batch schema")
    return violations


@dataclass(frozen=True)
class WindowSplit:
    """History/current partition of one source's records at a time boundary."""

    history: RecordBatch
    current: RecordBatch
    boundary: int

    def __post_init__(self) -> None:
        if self.history.source is not self.current.source:
            raise ValueError("history and current must share the same source kind")
        for record in self.history.records:
            if record.timestamp >= self.boundary:
                raise ValueError(
                    f"history record {record.record_id} at t={record.timestamp} not before boundary {self.boundary}"
                )
        for record in self.current.records:
            if record.timestamp < self.boundary:
                raise ValueError(
                    f"current record {record.record_id} at t={record.timestamp} before boundary {self.boundary}"
                )
