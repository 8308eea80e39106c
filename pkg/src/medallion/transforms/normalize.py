"""Bronze-to-Silver normalization.

The three simulated sources disagree on everything: Jenkins reports epoch
seconds, GitHub ISO 8601 with arbitrary offsets, Jira ISO 8601 UTC; the same
person shows up as a VCS handle in one system and an email address in another.
This module is where those disagreements end. Everything downstream sees UTC
instants, canonical contributor ids, and typed SilverEvents.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Mapping

from ..errors import SchemaValidationError
from ..store.types import EventKey, EventType, SilverEvent, SourceSystem


class TimestampEncoding(str, Enum):
    EPOCH_SECONDS = "epoch_seconds"
    ISO8601 = "iso8601"


def normalize_timestamp(raw: Any, encoding: TimestampEncoding) -> datetime:
    """Decode a source timestamp to a UTC instant. Offsets are consumed, never
    kept; a bare ISO string without offset is taken as UTC."""
    if encoding is TimestampEncoding.EPOCH_SECONDS:
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise SchemaValidationError("", "timestamp", f"expected epoch seconds, got {raw!r}")
        return datetime.fromtimestamp(raw, tz=timezone.utc)
    if not isinstance(raw, str):
        raise SchemaValidationError("", "timestamp", f"expected ISO 8601 string, got {raw!r}")
    try:
        parsed = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except ValueError:
        raise SchemaValidationError("", "timestamp", f"unparseable timestamp {raw!r}") from None
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed.astimezone(timezone.utc)


@dataclass
class TransformTelemetry:
    """Counters surfaced in run task telemetry. Not thread-safe; each task
    invocation owns its own instance."""

    unmapped_identities: int = 0
    unresolvable_commits: int = 0
    orphan_resolutions: int = 0
    dropped: dict[str, int] = field(default_factory=dict)

    def drop(self, reason: str) -> None:
        self.dropped[reason] = self.dropped.get(reason, 0) + 1

    def to_doc(self) -> dict:
        return {
            "unmapped_identities": self.unmapped_identities,
            "unresolvable_commits": self.unresolvable_commits,
            "orphan_resolutions": self.orphan_resolutions,
            "dropped": dict(sorted(self.dropped.items())),
        }


class IdentityMap:
    """Alias (VCS handle or email) -> canonical contributor id.

    Lookup is case-insensitive. Unknown aliases resolve to a synthetic
    "unmapped:<alias>" id so the pipeline never stalls on a new hire.
    """

    def __init__(self, entries: Mapping[str, str]):
        self._entries: dict[str, str] = {}
        for alias, contributor_id in entries.items():
            if not contributor_id:
                raise ValueError(f"empty contributor_id for alias {alias!r}")
            self._entries[alias.lower()] = contributor_id

    def lookup(self, alias: str) -> str | None:
        return self._entries.get(alias.lower())

    def to_doc(self) -> dict:
        return dict(sorted(self._entries.items()))

    @classmethod
    def from_doc(cls, doc: Mapping[str, str]) -> "IdentityMap":
        return cls(doc)

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, IdentityMap):
            return NotImplemented
        return self._entries == other._entries

    def __hash__(self):
        return hash(tuple(sorted(self._entries.items())))


def resolve_identity(
    alias: str, identity: IdentityMap, telemetry: TransformTelemetry | None = None
) -> str:
    mapped = identity.lookup(alias)
    if mapped is not None:
        return mapped
    if telemetry is not None:
        telemetry.unmapped_identities += 1
    return f"unmapped:{alias.lower()}"


@dataclass(frozen=True)
class SourceSchema:
    """Required payload fields (name -> python type) for one source, plus the
    timestamp field lead-time math depends on and its wire encoding."""

    source_system: SourceSystem
    encoding: TimestampEncoding
    critical_field: str
    required: Mapping[str, type]

    def __post_init__(self):
        if self.critical_field not in self.required:
            raise ValueError(
                f"{self.source_system}: critical field {self.critical_field!r} not declared required"
            )
        for name, typ in self.required.items():
            if not isinstance(typ, type):
                raise ValueError(f"{self.source_system}: field {name!r} declared without a type")

    def validate_item(self, item: Mapping[str, Any]) -> None:
        """Fail fast on the first missing or mistyped required field."""
        for name, typ in self.required.items():
            if name not in item:
                raise SchemaValidationError(self.source_system.value, name, "missing required field")
            value = item[name]
            if typ is int and isinstance(value, bool):
                raise SchemaValidationError(self.source_system.value, name, "expected integer, got bool")
            if not isinstance(value, typ):
                raise SchemaValidationError(
                    self.source_system.value, name,
                    f"expected {typ.__name__}, got {type(value).__name__}",
                )


_TYPE_NAMES = {"string": str, "integer": int}


@dataclass(frozen=True)
class SilverSchema:
    sources: Mapping[SourceSystem, SourceSchema]

    def for_source(self, source_system: SourceSystem) -> SourceSchema:
        return self.sources[source_system]

    def with_renamed_field(self, source_system: SourceSystem, old: str, new: str) -> "SilverSchema":
        """The operator fix for an upstream rename: accept the new field name.
        Returns a new schema; the old one stays valid for audit."""
        schema = self.sources[source_system]
        if old not in schema.required:
            raise ValueError(f"{source_system.value} schema has no field {old!r}")
        required = {new if name == old else name: typ for name, typ in schema.required.items()}
        critical = new if schema.critical_field == old else schema.critical_field
        patched = replace(schema, required=required, critical_field=critical)
        return SilverSchema({**self.sources, source_system: patched})

    def to_doc(self) -> dict:
        out = {}
        for source, schema in sorted(self.sources.items(), key=lambda kv: kv[0].value):
            out[source.value] = {
                "encoding": schema.encoding.value,
                "critical_field": schema.critical_field,
                "required": {
                    name: ("integer" if typ is int else "string")
                    for name, typ in schema.required.items()
                },
            }
        return out

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "SilverSchema":
        sources = {}
        for source_name, body in doc.items():
            source = SourceSystem(source_name)
            sources[source] = SourceSchema(
                source_system=source,
                encoding=TimestampEncoding(body["encoding"]),
                critical_field=body["critical_field"],
                required={name: _TYPE_NAMES[t] for name, t in body["required"].items()},
            )
        return cls(sources)


def default_silver_schema() -> SilverSchema:
    return SilverSchema(
        {
            SourceSystem.JIRA: SourceSchema(
                source_system=SourceSystem.JIRA,
                encoding=TimestampEncoding.ISO8601,
                critical_field="created",
                required={
                    "key": str,
                    "transition": str,
                    "created": str,
                    "reporter": str,
                    "team": str,
                    "repo": str,
                    "severity": str,
                },
            ),
            SourceSystem.GITHUB: SourceSchema(
                source_system=SourceSystem.GITHUB,
                encoding=TimestampEncoding.ISO8601,
                critical_field="committed_at",
                required={
                    "sha": str,
                    "author": str,
                    "committed_at": str,
                    "team": str,
                    "repo": str,
                    "message": str,
                },
            ),
            SourceSystem.JENKINS: SourceSchema(
                source_system=SourceSystem.JENKINS,
                encoding=TimestampEncoding.EPOCH_SECONDS,
                critical_field="timestamp",
                required={
                    "build_id": str,
                    "job_name": str,
                    "job_type": str,
                    "result": str,
                    "timestamp": int,
                    "git_commit": str,
                    "started_by": str,
                    "team": str,
                    "repo": str,
                },
            ),
        }
    )


@dataclass(frozen=True)
class FilterRules:
    """What never reaches Silver: bot-authored events, aborted builds, and
    (optionally) incident severities excluded from failure accounting."""

    bot_author_patterns: tuple[str, ...] = ("[bot]",)
    excluded_build_statuses: frozenset[str] = frozenset({"aborted"})
    excluded_incident_severities: frozenset[str] = frozenset()

    def is_bot(self, alias: str) -> bool:
        lowered = alias.lower()
        return any(lowered == p.lower() or lowered.endswith(p.lower()) for p in self.bot_author_patterns)

    def to_doc(self) -> dict:
        return {
            "bot_author_patterns": list(self.bot_author_patterns),
            "excluded_build_statuses": sorted(self.excluded_build_statuses),
            "excluded_incident_severities": sorted(self.excluded_incident_severities),
        }

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "FilterRules":
        return cls(
            bot_author_patterns=tuple(doc.get("bot_author_patterns", ("[bot]",))),
            excluded_build_statuses=frozenset(doc.get("excluded_build_statuses", {"aborted"})),
            excluded_incident_severities=frozenset(doc.get("excluded_incident_severities", ())),
        )


@dataclass(frozen=True)
class Drop:
    """A payload intentionally excluded from Silver, with the reason recorded."""

    reason: str


def to_silver(
    item: Mapping[str, Any],
    source_system: SourceSystem,
    schema: SilverSchema,
    identity: IdentityMap,
    filters: FilterRules,
    telemetry: TransformTelemetry | None = None,
) -> SilverEvent | Drop:
    """Normalize one raw source item. Returns the event, or Drop for payloads
    the rules exclude; raises SchemaValidationError on missing or mistyped
    fields so the task fails fast with no partial writes."""
    source_schema = schema.for_source(source_system)
    source_schema.validate_item(item)

    if source_system is SourceSystem.GITHUB:
        return _github_commit(item, source_schema, identity, filters, telemetry)
    if source_system is SourceSystem.JENKINS:
        return _jenkins_build(item, source_schema, identity, filters, telemetry)
    if source_system is SourceSystem.JIRA:
        return _jira_transition(item, source_schema, identity, filters, telemetry)
    raise SchemaValidationError(str(source_system), "", "no mapping for source")


def _dropped(telemetry: TransformTelemetry | None, reason: str) -> Drop:
    if telemetry is not None:
        telemetry.drop(reason)
    return Drop(reason)


def _github_commit(item, schema, identity, filters, telemetry) -> SilverEvent | Drop:
    author = item["author"]
    if filters.is_bot(author):
        return _dropped(telemetry, "bot_author")
    occurred_at = _critical_instant(item, schema)
    return SilverEvent(
        event_key=EventKey(SourceSystem.GITHUB, item["sha"]),
        event_type=EventType.COMMIT,
        occurred_at=occurred_at,
        contributor_id=resolve_identity(author, identity, telemetry),
        team_id=item["team"],
        repository=item["repo"],
        attributes={"commit_sha": item["sha"], "message": item["message"]},
    )


def _jenkins_build(item, schema, identity, filters, telemetry) -> SilverEvent | Drop:
    result = item["result"].lower()
    if result in filters.excluded_build_statuses:
        return _dropped(telemetry, "aborted_build")
    starter = item["started_by"]
    if filters.is_bot(starter):
        return _dropped(telemetry, "bot_author")
    occurred_at = _critical_instant(item, schema)
    is_deployment = item["job_type"] == "deploy" and result == "success"
    return SilverEvent(
        event_key=EventKey(SourceSystem.JENKINS, item["build_id"]),
        event_type=EventType.DEPLOYMENT if is_deployment else EventType.BUILD,
        occurred_at=occurred_at,
        contributor_id=resolve_identity(starter, identity, telemetry),
        team_id=item["team"],
        repository=item["repo"],
        attributes={
            "job_name": item["job_name"],
            "job_type": item["job_type"],
            "status": result,
            "linked_commit_sha": item["git_commit"],
        },
    )


def _jira_transition(item, schema, identity, filters, telemetry) -> SilverEvent | Drop:
    severity = item["severity"]
    if severity in filters.excluded_incident_severities:
        return _dropped(telemetry, "excluded_severity")
    transition = item["transition"]
    key = item["key"]
    if transition == "opened":
        occurred_at = _critical_instant(item, schema)
        event_type = EventType.INCIDENT_OPENED
    elif transition == "resolved":
        raw = item.get("resolved")
        if raw is None:
            raise SchemaValidationError(
                SourceSystem.JIRA.value, "resolved", "resolved transition without timestamp"
            )
        occurred_at = _instant(raw, schema, "resolved")
        event_type = EventType.INCIDENT_RESOLVED
    else:
        raise SchemaValidationError(
            SourceSystem.JIRA.value, "transition", f"unknown transition {transition!r}"
        )
    return SilverEvent(
        event_key=EventKey(SourceSystem.JIRA, f"{key}:{transition}"),
        event_type=event_type,
        occurred_at=occurred_at,
        contributor_id=resolve_identity(item["reporter"], identity, telemetry),
        team_id=item["team"],
        repository=item["repo"],
        attributes={"incident_id": key, "severity": severity},
    )


def _critical_instant(item: Mapping[str, Any], schema: SourceSchema):
    return _instant(item[schema.critical_field], schema, schema.critical_field)


def _instant(raw: Any, schema: SourceSchema, field_name: str):
    try:
        return normalize_timestamp(raw, schema.encoding)
    except SchemaValidationError as exc:
        raise SchemaValidationError(schema.source_system.value, field_name, exc.args[0]) from None
