"""Run and task state machines.

TaskRun/DagRun are mutable working records owned by one scheduler loop; every
transition is checked against the legal set and appended to the run's
transcript, which is what the scenario runner and the UI replay.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, datetime
from enum import Enum
from typing import Any, Mapping, Optional

from ..errors import IllegalTransitionError
from ..store.types import fmt_instant, parse_day, parse_instant


class TaskState(str, Enum):
    PENDING = "pending"
    QUEUED = "queued"
    RUNNING = "running"
    RETRYING = "retrying"
    SUCCESS = "success"
    FAILED = "failed"
    UPSTREAM_FAILED = "upstream_failed"
    DEAD_LETTERED = "dead_lettered"


class RunState(str, Enum):
    RUNNING = "running"
    SUCCESS = "success"
    FAILED = "failed"
    HALTED_BY_SENSOR = "halted_by_sensor"


TERMINAL_TASK_STATES = frozenset(
    {TaskState.SUCCESS, TaskState.FAILED, TaskState.UPSTREAM_FAILED, TaskState.DEAD_LETTERED}
)

CLEARABLE_TASK_STATES = frozenset(
    {TaskState.FAILED, TaskState.DEAD_LETTERED, TaskState.UPSTREAM_FAILED}
)

_LEGAL = {
    TaskState.PENDING: {TaskState.QUEUED, TaskState.UPSTREAM_FAILED},
    TaskState.QUEUED: {TaskState.RUNNING},
    TaskState.RUNNING: {TaskState.SUCCESS, TaskState.RETRYING, TaskState.FAILED},
    TaskState.RETRYING: {TaskState.QUEUED},
    TaskState.FAILED: {TaskState.DEAD_LETTERED},
    TaskState.SUCCESS: set(),
    TaskState.UPSTREAM_FAILED: set(),
    TaskState.DEAD_LETTERED: set(),
}


@dataclass
class TaskRun:
    task_id: str
    state: TaskState = TaskState.PENDING
    attempt: int = 0
    next_eligible_at: Optional[datetime] = None
    last_error: Optional[str] = None
    telemetry: dict[str, Any] = field(default_factory=dict)

    def transition(self, to_state: TaskState) -> None:
        if to_state not in _LEGAL[self.state]:
            raise IllegalTransitionError(
                f"task {self.task_id}: {self.state.value} -> {to_state.value} is not allowed"
            )
        self.state = to_state

    def reset(self) -> None:
        """Clear-state: back to pending as if never attempted."""
        self.state = TaskState.PENDING
        self.attempt = 0
        self.next_eligible_at = None
        self.last_error = None
        self.telemetry = {}

    def to_doc(self) -> dict:
        return {
            "task_id": self.task_id,
            "state": self.state.value,
            "attempt": self.attempt,
            "next_eligible_at": fmt_instant(self.next_eligible_at) if self.next_eligible_at else None,
            "last_error": self.last_error,
            "telemetry": self.telemetry,
        }

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "TaskRun":
        raw_eligible = doc.get("next_eligible_at")
        return cls(
            task_id=doc["task_id"],
            state=TaskState(doc["state"]),
            attempt=int(doc.get("attempt", 0)),
            next_eligible_at=parse_instant(raw_eligible) if raw_eligible else None,
            last_error=doc.get("last_error"),
            telemetry=dict(doc.get("telemetry", {})),
        )


@dataclass
class DagRun:
    run_id: str
    dag_id: str
    logical_date: date
    state: RunState = RunState.RUNNING
    task_runs: dict[str, TaskRun] = field(default_factory=dict)
    triggered_by: str = "manual"  # schedule | manual | backfill
    from_silver: bool = False
    transcript: list[dict] = field(default_factory=list)
    updated_at: Optional[datetime] = None

    def record(self, at: datetime, subject: str, from_state: str, to_state: str, note: str = "") -> None:
        entry = {"at": fmt_instant(at), "subject": subject, "from": from_state, "to": to_state}
        if note:
            entry["note"] = note
        self.transcript.append(entry)
        self.updated_at = at

    def is_terminal(self) -> bool:
        return self.state is not RunState.RUNNING

    def to_doc(self) -> dict:
        return {
            "run_id": self.run_id,
            "dag_id": self.dag_id,
            "logical_date": self.logical_date.isoformat(),
            "state": self.state.value,
            "triggered_by": self.triggered_by,
            "from_silver": self.from_silver,
            "task_runs": {tid: tr.to_doc() for tid, tr in sorted(self.task_runs.items())},
            "transcript": list(self.transcript),
            "updated_at": fmt_instant(self.updated_at) if self.updated_at else None,
        }

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "DagRun":
        raw_updated = doc.get("updated_at")
        return cls(
            run_id=doc["run_id"],
            dag_id=doc["dag_id"],
            logical_date=parse_day(doc["logical_date"]),
            state=RunState(doc["state"]),
            task_runs={tid: TaskRun.from_doc(td) for tid, td in doc.get("task_runs", {}).items()},
            triggered_by=doc.get("triggered_by", "manual"),
            from_silver=bool(doc.get("from_silver", False)),
            transcript=list(doc.get("transcript", [])),
            updated_at=parse_instant(raw_updated) if raw_updated else None,
        )


def run_id_for(dag_id: str, logical_date: date) -> str:
    """Run identity is (dag, logical date): re-triggering the same day resumes
    the same entity, which is what makes re-runs idempotent."""
    return f"{dag_id}__{logical_date.isoformat()}"


@dataclass(frozen=True)
class DlqEntry:
    run_id: str
    task_id: str
    logical_date: date
    payload_metadata: Mapping[str, Any]
    enqueued_at: datetime

    def to_doc(self) -> dict:
        return {
            "run_id": self.run_id,
            "task_id": self.task_id,
            "logical_date": self.logical_date.isoformat(),
            "payload_metadata": dict(self.payload_metadata),
            "enqueued_at": fmt_instant(self.enqueued_at),
        }

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "DlqEntry":
        return cls(
            run_id=doc["run_id"],
            task_id=doc["task_id"],
            logical_date=parse_day(doc["logical_date"]),
            payload_metadata=dict(doc.get("payload_metadata", {})),
            enqueued_at=parse_instant(doc["enqueued_at"]),
        )
