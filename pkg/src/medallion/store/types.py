"""Domain records for the three medallion layers and the change log.

Every persisted document carries schema_version=1 and is serialized as
canonical JSON (sorted keys, no whitespace) so segment files can be compared
byte-for-byte after compaction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from enum import Enum
from typing import Any, Optional

from ..errors import ValidationError

SCHEMA_VERSION = 1


class SourceSystem(str, Enum):
    JIRA = "jira"
    GITHUB = "github"
    JENKINS = "jenkins"


class EventType(str, Enum):
    DEPLOYMENT = "deployment"
    COMMIT = "commit"
    INCIDENT_OPENED = "incident_opened"
    INCIDENT_RESOLVED = "incident_resolved"
    BUILD = "build"


class MetricType(str, Enum):
    DEPLOYMENT_FREQUENCY = "deployment_frequency"
    LEAD_TIME_MEDIAN = "lead_time_median"
    CHANGE_FAILURE_RATE = "change_failure_rate"
    MTTR = "mttr"


METRIC_UNITS = {
    MetricType.DEPLOYMENT_FREQUENCY: "count/day",
    MetricType.LEAD_TIME_MEDIAN: "minutes",
    MetricType.CHANGE_FAILURE_RATE: "ratio",
    MetricType.MTTR: "minutes",
}


class ChangeOp(str, Enum):
    INSERT = "insert"
    REPLACE = "replace"


def dump_doc(doc: dict) -> str:
    """Canonical one-line JSON for segment files."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), default=_json_default)


def _json_default(value: Any):
    if isinstance(value, datetime):
        return fmt_instant(value)
    if isinstance(value, date):
        return value.isoformat()
    if isinstance(value, Enum):
        return value.value
    raise TypeError(f"not JSON-serializable: {value!r}")


def fmt_instant(dt: datetime) -> str:
    if dt.tzinfo is None:
        raise ValidationError(f"naive datetime cannot be persisted: {dt!r}")
    return dt.astimezone(timezone.utc).isoformat()


def parse_instant(raw: str) -> datetime:
    dt = datetime.fromisoformat(raw)
    if dt.tzinfo is None:
        raise ValidationError(f"stored instant lost its offset: {raw!r}")
    return dt.astimezone(timezone.utc)


def parse_day(raw: str) -> date:
    return date.fromisoformat(raw)


@dataclass(frozen=True)
class BronzeRecord:
    """Immutable raw payload envelope. Payload is stored exactly as fetched."""

    bronze_id: str
    payload: dict
    fetched_at: datetime
    source_system: SourceSystem
    execution_id: str

    def to_doc(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "bronze_id": self.bronze_id,
            "payload": self.payload,
            "fetched_at": fmt_instant(self.fetched_at),
            "source_system": self.source_system.value,
            "execution_id": self.execution_id,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "BronzeRecord":
        return cls(
            bronze_id=doc["bronze_id"],
            payload=doc["payload"],
            fetched_at=parse_instant(doc["fetched_at"]),
            source_system=SourceSystem(doc["source_system"]),
            execution_id=doc["execution_id"],
        )


@dataclass(frozen=True)
class EventKey:
    source_system: SourceSystem
    source_native_id: str

    def as_tuple(self) -> tuple:
        return (self.source_system.value, self.source_native_id)


@dataclass(frozen=True)
class SilverEvent:
    """Normalized, identity-resolved engineering event. occurred_at is always UTC."""

    event_key: EventKey
    event_type: EventType
    occurred_at: datetime
    contributor_id: str
    team_id: str
    repository: str
    attributes: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.occurred_at.tzinfo is None:
            raise ValidationError("SilverEvent.occurred_at must be tz-aware UTC")
        object.__setattr__(self, "occurred_at", self.occurred_at.astimezone(timezone.utc))

    def to_doc(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "source_system": self.event_key.source_system.value,
            "source_native_id": self.event_key.source_native_id,
            "event_type": self.event_type.value,
            "occurred_at": fmt_instant(self.occurred_at),
            "contributor_id": self.contributor_id,
            "team_id": self.team_id,
            "repository": self.repository,
            "attributes": self.attributes,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "SilverEvent":
        return cls(
            event_key=EventKey(SourceSystem(doc["source_system"]), doc["source_native_id"]),
            event_type=EventType(doc["event_type"]),
            occurred_at=parse_instant(doc["occurred_at"]),
            contributor_id=doc["contributor_id"],
            team_id=doc["team_id"],
            repository=doc["repository"],
            attributes=doc.get("attributes", {}),
        )


@dataclass(frozen=True)
class GoldMetric:
    """Pre-aggregated daily metric, unique per {date, team_id, metric_type}."""

    date: date
    team_id: str
    metric_type: MetricType
    value: float
    computed_at: datetime
    execution_id: str

    def __post_init__(self):
        validate_gold_value(self.metric_type, self.value)

    @property
    def unit(self) -> str:
        return METRIC_UNITS[self.metric_type]

    def key(self) -> tuple:
        return (self.date.isoformat(), self.team_id, self.metric_type.value)

    def to_doc(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "date": self.date.isoformat(),
            "team_id": self.team_id,
            "metric_type": self.metric_type.value,
            "value": self.value,
            "unit": self.unit,
            "computed_at": fmt_instant(self.computed_at),
            "execution_id": self.execution_id,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "GoldMetric":
        return cls(
            date=parse_day(doc["date"]),
            team_id=doc["team_id"],
            metric_type=MetricType(doc["metric_type"]),
            value=doc["value"],
            computed_at=parse_instant(doc["computed_at"]),
            execution_id=doc["execution_id"],
        )


def validate_gold_value(metric_type: MetricType, value) -> None:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ValidationError(f"metric value must be numeric, got {value!r}")
    if metric_type is MetricType.CHANGE_FAILURE_RATE and not (0.0 <= value <= 1.0):
        raise ValidationError(f"change_failure_rate must be within [0, 1], got {value}")
    if value < 0:
        raise ValidationError(f"{metric_type.value} cannot be negative, got {value}")


@dataclass(frozen=True)
class ChangeEvent:
    """One entry in the Gold change log. Tokens are dense and strictly increasing."""

    token: int
    op: ChangeOp
    collection: str
    document: dict
    emitted_at: datetime

    def to_doc(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "token": self.token,
            "op": self.op.value,
            "collection": self.collection,
            "document": self.document,
            "emitted_at": fmt_instant(self.emitted_at),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ChangeEvent":
        return cls(
            token=doc["token"],
            op=ChangeOp(doc["op"]),
            collection=doc["collection"],
            document=doc["document"],
            emitted_at=parse_instant(doc["emitted_at"]),
        )

    @property
    def metric(self) -> GoldMetric:
        return GoldMetric.from_doc(self.document)


@dataclass(frozen=True)
class BucketStats:
    partition_field: str
    bucket_count: int
    mean_events_per_bucket: float


class UpsertOutcome(str, Enum):
    INSERTED = "inserted"
    REPLACED = "replaced"
