"""Embedded medallion storage engine.

Layers live under one data directory::

    <root>/bronze/*.seg      append-only raw payload envelopes
    <root>/silver/*.seg      upsert-keyed normalized events
    <root>/gold/*.seg        upsert-keyed daily metrics
    <root>/changelog.seg     one ChangeEvent per successful Gold write
    <root>/runs.seg          DagRun snapshots (orchestrator state)
    <root>/dlq.seg           dead-lettered task metadata
    <root>/alerts.seg        alert sink (deduplicated by alert key)
    <root>/volume_history.seg  per-source daily fetch counts
    <root>/checkpoints/<consumer_id>.json

All indexes are in-memory and rebuilt on open. A Gold upsert appends the
document (tagged with its change token) and then the ChangeEvent; recovery
rolls the change log forward if a crash separated the two appends, so no
state is observable where one exists without the other.
"""

from __future__ import annotations

import hashlib
import threading
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Iterator, Optional

from ..clock import Clock, ensure_utc
from ..errors import CrashInjected, ResumeTokenError, ValidationError
from .segments import SegmentDir, SegmentFile, read_single_doc, write_single_doc
from .types import (
    SCHEMA_VERSION,
    BronzeRecord,
    BucketStats,
    ChangeEvent,
    ChangeOp,
    EventKey,
    EventType,
    GoldMetric,
    MetricType,
    SilverEvent,
    SourceSystem,
    UpsertOutcome,
    fmt_instant,
    parse_day,
    parse_instant,
)

GOLD_KEY_ORDER = ("date", "team_id", "metric_type")


def _gold_sort_key(doc: dict) -> tuple:
    return tuple(doc[f] for f in GOLD_KEY_ORDER)


class MedallionStore:
    """Single-process store handle. Safe to share across threads."""

    def __init__(self, root: Path | str, clock: Clock):
        self.root = Path(root)
        self.clock = clock
        self._bronze = SegmentDir(self.root / "bronze")
        self._silver = SegmentDir(self.root / "silver")
        self._gold = SegmentDir(self.root / "gold")
        self._changelog = SegmentFile(self.root / "changelog.seg")
        self._runs = SegmentFile(self.root / "runs.seg")
        self._dlq = SegmentFile(self.root / "dlq.seg")
        self._alerts = SegmentFile(self.root / "alerts.seg")
        self._volume = SegmentFile(self.root / "volume_history.seg")

        self._bronze_lock = threading.RLock()
        self._silver_lock = threading.RLock()
        self._commit_lock = threading.RLock()
        self._ops_lock = threading.RLock()
        self._change_cond = threading.Condition(self._commit_lock)

        # test hook: crash between sub-steps of the gold commit
        self._crash_points: set[str] = set()

        self._load()

    # ------------------------------------------------------------------ load

    def _load(self) -> None:
        self._bronze_records: list[BronzeRecord] = []
        self._bronze_id_counts: dict[str, int] = {}
        for doc in self._bronze.load():
            record = BronzeRecord.from_doc(doc)
            self._bronze_records.append(record)
            base = record.bronze_id.split("-")[0]
            self._bronze_id_counts[base] = self._bronze_id_counts.get(base, 0) + 1

        self._silver_index: dict[tuple, SilverEvent] = {}
        for doc in self._silver.load():
            event = SilverEvent.from_doc(doc)
            self._silver_index[event.event_key.as_tuple()] = event

        self._change_events: list[ChangeEvent] = [ChangeEvent.from_doc(d) for d in self._changelog.load()]
        self._max_token = self._change_events[-1].token if self._change_events else 0

        self._gold_index: dict[tuple, dict] = {}
        last_doc: dict | None = None
        last_had_prior = False
        last_token: int | None = None
        for doc in self._gold.load():
            token = doc.pop("change_token", None)
            key = _gold_sort_key(doc)
            last_had_prior = key in self._gold_index
            self._gold_index[key] = doc
            last_doc, last_token = doc, token

        # roll forward: gold tail committed but its change event never made it
        if last_token is not None and last_token > self._max_token:
            op = ChangeOp.REPLACE if last_had_prior else ChangeOp.INSERT
            event = ChangeEvent(
                token=last_token,
                op=op,
                collection="gold",
                document=dict(last_doc or {}),
                emitted_at=self.clock.now(),
            )
            self._changelog.append(event.to_doc())
            self._change_events.append(event)
            self._max_token = last_token

        self._run_latest: dict[str, dict] = {}
        self._run_history: dict[str, list[dict]] = {}
        self._run_order: list[str] = []
        for doc in self._runs.load():
            run_id = doc["run_id"]
            if run_id not in self._run_latest:
                self._run_order.append(run_id)
                self._run_history[run_id] = []
            self._run_latest[run_id] = doc
            self._run_history[run_id].append(doc)

        self._dlq_entries: list[dict] = list(self._dlq.load())
        self._alert_docs: list[dict] = list(self._alerts.load())
        self._alert_keys: set[tuple] = {_alert_key(d) for d in self._alert_docs}

        self._volume_index: dict[tuple, dict[str, int]] = {}
        for doc in self._volume.load():
            key = (doc["source_system"], doc.get("team_id", ""))
            self._volume_index.setdefault(key, {})[doc["logical_date"]] = doc["record_count"]

    # ---------------------------------------------------------------- bronze

    def append_bronze(
        self,
        payload: dict,
        *,
        fetched_at: datetime,
        source_system: SourceSystem,
        execution_id: str,
    ) -> str:
        if not payload:
            raise ValidationError("bronze payload must be non-empty")
        fetched_at = ensure_utc(fetched_at)
        with self._bronze_lock:
            digest = hashlib.sha1(
                f"{execution_id}|{source_system.value}|{fmt_instant(fetched_at)}|"
                f"{sorted(payload.items(), key=repr)!r}".encode()
            ).hexdigest()[:16]
            base = f"b{digest}"
            seen = self._bronze_id_counts.get(base, 0)
            bronze_id = base if seen == 0 else f"{base}-{seen + 1}"
            self._bronze_id_counts[base] = seen + 1
            record = BronzeRecord(
                bronze_id=bronze_id,
                payload=payload,
                fetched_at=fetched_at,
                source_system=source_system,
                execution_id=execution_id,
            )
            self._bronze.append(record.to_doc())
            self._bronze_records.append(record)
            return bronze_id

    def query_bronze(
        self,
        *,
        source_system: Optional[SourceSystem] = None,
        execution_id: Optional[str] = None,
    ) -> list[BronzeRecord]:
        with self._bronze_lock:
            out = []
            for record in self._bronze_records:
                if source_system is not None and record.source_system is not source_system:
                    continue
                if execution_id is not None and record.execution_id != execution_id:
                    continue
                out.append(record)
            return out

    def bronze_count(self) -> int:
        with self._bronze_lock:
            return len(self._bronze_records)

    def compact_bronze(self, now: datetime, retention_days: int = 30) -> int:
        """Purge records with fetched_at strictly older than the retention window."""
        if retention_days < 1:
            raise ValidationError("retention_days must be >= 1")
        cutoff = ensure_utc(now) - timedelta(days=retention_days)
        with self._bronze_lock:
            keep = [r for r in self._bronze_records if not (r.fetched_at < cutoff)]
            purged = len(self._bronze_records) - len(keep)
            if purged:
                self._bronze.rewrite(r.to_doc() for r in keep)
                self._bronze_records = keep
            return purged

    # ---------------------------------------------------------------- silver

    def upsert_silver(self, event: SilverEvent) -> UpsertOutcome:
        with self._silver_lock:
            key = event.event_key.as_tuple()
            outcome = UpsertOutcome.REPLACED if key in self._silver_index else UpsertOutcome.INSERTED
            self._silver.append(event.to_doc())
            self._silver_index[key] = event
            return outcome

    def get_silver(self, key: EventKey) -> Optional[SilverEvent]:
        with self._silver_lock:
            return self._silver_index.get(key.as_tuple())

    def query_silver(
        self,
        *,
        date_from: Optional[date] = None,
        date_to: Optional[date] = None,
        team_id: Optional[str] = None,
        event_type: Optional[EventType] = None,
    ) -> list[SilverEvent]:
        with self._silver_lock:
            events = list(self._silver_index.values())
        out = []
        for event in events:
            day = event.occurred_at.date()
            if date_from is not None and day < date_from:
                continue
            if date_to is not None and day > date_to:
                continue
            if team_id is not None and event.team_id != team_id:
                continue
            if event_type is not None and event.event_type is not event_type:
                continue
            out.append(event)
        out.sort(key=lambda e: (e.occurred_at, e.event_key.as_tuple()))
        return out

    def silver_count(self) -> int:
        with self._silver_lock:
            return len(self._silver_index)

    def compact_silver(self) -> None:
        """Rewrite silver as one segment, live records in event-key order."""
        with self._silver_lock:
            docs = [self._silver_index[k].to_doc() for k in sorted(self._silver_index)]
            self._silver.rewrite(docs)

    # ------------------------------------------------------------------ gold

    def upsert_gold(self, metric: GoldMetric) -> tuple[UpsertOutcome, ChangeEvent]:
        doc = metric.to_doc()
        key = _gold_sort_key(doc)
        with self._commit_lock:
            existed = key in self._gold_index
            token = self._max_token + 1
            stored = dict(doc)
            stored["change_token"] = token
            self._gold.append(stored)
            if "after_gold_append" in self._crash_points:
                raise CrashInjected("crash injected between gold append and changelog append")
            event = ChangeEvent(
                token=token,
                op=ChangeOp.REPLACE if existed else ChangeOp.INSERT,
                collection="gold",
                document=doc,
                emitted_at=self.clock.now(),
            )
            self._changelog.append(event.to_doc())
            self._gold_index[key] = doc
            self._change_events.append(event)
            self._max_token = token
            self._change_cond.notify_all()
            outcome = UpsertOutcome.REPLACED if existed else UpsertOutcome.INSERTED
            return outcome, event

    def query_gold(
        self,
        date_from: date,
        date_to: date,
        *,
        team_id: Optional[str] = None,
        metric_type: Optional[MetricType] = None,
    ) -> list[GoldMetric]:
        if date_from > date_to:
            raise ValidationError(f"inverted date range: {date_from} > {date_to}")
        with self._commit_lock:
            docs = list(self._gold_index.values())
        out = []
        for doc in docs:
            day = parse_day(doc["date"])
            if not (date_from <= day <= date_to):
                continue
            if team_id is not None and doc["team_id"] != team_id:
                continue
            if metric_type is not None and doc["metric_type"] != metric_type.value:
                continue
            out.append(GoldMetric.from_doc(doc))
        out.sort(key=lambda m: (m.date, m.team_id, m.metric_type.value))
        return out

    def gold_count(self) -> int:
        with self._commit_lock:
            return len(self._gold_index)

    def compact_gold(self) -> None:
        """Rewrite gold as one segment: live records only, canonical key order,
        commit-token bookkeeping stripped. Output is a pure function of the
        live Gold state, so equal states compact to byte-identical segments."""
        with self._commit_lock:
            docs = [self._gold_index[k] for k in sorted(self._gold_index)]
            self._gold.rewrite(docs)

    def gold_segment_bytes(self) -> bytes:
        with self._commit_lock:
            return self._gold.read_bytes()

    def silver_segment_bytes(self) -> bytes:
        with self._silver_lock:
            return self._silver.read_bytes()

    def bronze_segment_bytes(self) -> bytes:
        with self._bronze_lock:
            return self._bronze.read_bytes()

    # --------------------------------------------------------------- changes

    def max_token(self) -> int:
        with self._commit_lock:
            return self._max_token

    def read_changes(self, after_token: int = 0, collection: str = "gold") -> list[ChangeEvent]:
        """All retained events with token > after_token, in token order."""
        self._validate_token(after_token, collection)
        with self._commit_lock:
            return list(self._change_events[after_token:])

    def subscribe_changes(
        self,
        collection: str = "gold",
        after_token: int = 0,
        *,
        stop_event: Optional[threading.Event] = None,
        block: bool = True,
        poll_seconds: float = 0.05,
    ) -> Iterator[ChangeEvent]:
        """Replay everything after ``after_token``, then yield live events.

        With block=False the iterator ends once the backlog is drained. With
        block=True it waits for new commits until ``stop_event`` is set.
        """
        self._validate_token(after_token, collection)
        cursor = after_token
        while True:
            with self._commit_lock:
                backlog = list(self._change_events[cursor:])
            for event in backlog:
                cursor = event.token
                yield event
            if not block:
                return
            with self._change_cond:
                if self._max_token > cursor:
                    continue
                if stop_event is not None and stop_event.is_set():
                    return
                self._change_cond.wait(timeout=poll_seconds)
            if stop_event is not None and stop_event.is_set():
                return

    def _validate_token(self, after_token: int, collection: str) -> None:
        if collection != "gold":
            raise ResumeTokenError(f"unknown change collection: {collection!r}")
        if not isinstance(after_token, int) or isinstance(after_token, bool):
            raise ResumeTokenError(f"resume token must be an integer, got {after_token!r}")
        with self._commit_lock:
            if after_token < 0 or after_token > self._max_token:
                raise ResumeTokenError(
                    f"token {after_token} was never emitted (log is 1..{self._max_token}); "
                    "restart from 0 or a known checkpoint"
                )

    # ----------------------------------------------------------------- stats

    def bucket_stats(self, partition_field: str) -> BucketStats:
        if partition_field not in ("repository", "team_id"):
            raise ValidationError(f"unsupported partition field: {partition_field!r}")
        with self._silver_lock:
            events = list(self._silver_index.values())
        if not events:
            raise ValidationError("bucket_stats requires a non-empty Silver layer")
        buckets: dict[str, int] = {}
        for event in events:
            value = getattr(event, partition_field)
            buckets[value] = buckets.get(value, 0) + 1
        return BucketStats(
            partition_field=partition_field,
            bucket_count=len(buckets),
            mean_events_per_bucket=len(events) / len(buckets),
        )

    # ------------------------------------------------------------- run state

    def save_run(self, run_doc: dict) -> None:
        doc = dict(run_doc)
        doc["schema_version"] = SCHEMA_VERSION
        with self._ops_lock:
            run_id = doc["run_id"]
            if run_id not in self._run_latest:
                self._run_order.append(run_id)
                self._run_history[run_id] = []
            self._runs.append(doc)
            self._run_latest[run_id] = doc
            self._run_history[run_id].append(doc)

    def load_runs(self) -> list[dict]:
        with self._ops_lock:
            return [self._run_latest[r] for r in self._run_order]

    def get_run(self, run_id: str) -> Optional[dict]:
        with self._ops_lock:
            return self._run_latest.get(run_id)

    def run_snapshots(self, run_id: str) -> list[dict]:
        with self._ops_lock:
            return list(self._run_history.get(run_id, []))

    # ------------------------------------------------------------------- dlq

    def append_dlq(self, entry: dict) -> None:
        doc = dict(entry)
        doc["schema_version"] = SCHEMA_VERSION
        with self._ops_lock:
            self._dlq.append(doc)
            self._dlq_entries.append(doc)

    def list_dlq(self) -> list[dict]:
        with self._ops_lock:
            return list(self._dlq_entries)

    # ---------------------------------------------------------------- alerts

    def append_alert(self, alert_doc: dict) -> bool:
        """Append to the alert sink unless the alert key is already present."""
        doc = dict(alert_doc)
        doc["schema_version"] = SCHEMA_VERSION
        key = _alert_key(doc)
        with self._ops_lock:
            if key in self._alert_keys:
                return False
            self._alerts.append(doc)
            self._alert_docs.append(doc)
            self._alert_keys.add(key)
            return True

    def list_alerts(self) -> list[dict]:
        with self._ops_lock:
            return list(self._alert_docs)

    # -------------------------------------------------------- volume history

    def record_volume(self, source_system: SourceSystem, logical_date: date, count: int, team_id: str = "") -> None:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "source_system": source_system.value,
            "team_id": team_id,
            "logical_date": logical_date.isoformat(),
            "record_count": count,
        }
        with self._ops_lock:
            self._volume.append(doc)
            self._volume_index.setdefault((source_system.value, team_id), {})[logical_date.isoformat()] = count

    def volume_history(self, source_system: SourceSystem, team_id: str = "") -> list[tuple[date, int]]:
        """(date, count) pairs in ascending date order; at most one per date."""
        with self._ops_lock:
            entries = self._volume_index.get((source_system.value, team_id), {})
            return sorted((parse_day(d), c) for d, c in entries.items())

    # ------------------------------------------------------------ checkpoint

    def read_checkpoint(self, consumer_id: str) -> Optional[dict]:
        return read_single_doc(self.root / "checkpoints" / f"{consumer_id}.json")

    def clear_checkpoint(self, consumer_id: str) -> None:
        """Forget a checkpoint the log can no longer honor (e.g. it points past
        the last token). The consumer restarts from 0 and dedup absorbs the
        replay; without this the monotonic guard would block the recovery."""
        (self.root / "checkpoints" / f"{consumer_id}.json").unlink(missing_ok=True)

    def write_checkpoint(self, consumer_id: str, token: int, persisted_at: datetime) -> None:
        existing = self.read_checkpoint(consumer_id)
        if existing and existing["last_processed_token"] > token:
            raise ValidationError(
                f"checkpoint for {consumer_id} would regress: "
                f"{existing['last_processed_token']} -> {token}"
            )
        write_single_doc(
            self.root / "checkpoints" / f"{consumer_id}.json",
            {
                "schema_version": SCHEMA_VERSION,
                "consumer_id": consumer_id,
                "last_processed_token": token,
                "persisted_at": fmt_instant(persisted_at),
            },
        )

    # ----------------------------------------------------------------- admin

    def close(self) -> None:
        for layer in (self._bronze, self._silver, self._gold):
            layer.close()
        for f in (self._changelog, self._runs, self._dlq, self._alerts, self._volume):
            f.close()


def _alert_key(doc: dict) -> tuple:
    k = doc["alert_key"]
    return (k["rule_id"], k["date"], k["team_id"])
