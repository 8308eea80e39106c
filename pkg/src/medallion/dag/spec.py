"""Pipeline definitions: tasks, edges, retry policy.

A DagSpec is declarative data (usually loaded from YAML); validation returns
a deterministic topological order that the scheduler also uses for
tie-breaking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import timedelta
from enum import Enum
from typing import Any, Mapping

from ..errors import CycleError, UnknownTaskError, ValidationError
from ..store.types import SourceSystem


class TaskKind(str, Enum):
    EXTRACT = "extract"
    SENSOR = "sensor"
    TRANSFORM = "transform"
    AGGREGATE = "aggregate"
    VOLUME_CHECK = "volume_check"


@dataclass(frozen=True)
class RetryPolicy:
    max_retries: int = 3
    base_delay: timedelta = timedelta(minutes=5)
    max_delay: timedelta = timedelta(minutes=45)

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValidationError("max_retries must be >= 0")
        if self.base_delay < timedelta(0) or self.base_delay > self.max_delay:
            raise ValidationError("need 0 <= base_delay <= max_delay")

    def to_doc(self) -> dict:
        return {
            "max_retries": self.max_retries,
            "base_delay_minutes": self.base_delay.total_seconds() / 60.0,
            "max_delay_minutes": self.max_delay.total_seconds() / 60.0,
        }

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "RetryPolicy":
        return cls(
            max_retries=int(doc.get("max_retries", 3)),
            base_delay=timedelta(minutes=float(doc.get("base_delay_minutes", 5))),
            max_delay=timedelta(minutes=float(doc.get("max_delay_minutes", 45))),
        )


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    kind: TaskKind
    params: Mapping[str, Any] = field(default_factory=dict)

    def to_doc(self) -> dict:
        return {"task_id": self.task_id, "kind": self.kind.value, "params": dict(self.params)}

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "TaskSpec":
        return cls(
            task_id=doc["task_id"],
            kind=TaskKind(doc["kind"]),
            params=dict(doc.get("params", {})),
        )


@dataclass(frozen=True)
class DagSpec:
    dag_id: str
    tasks: tuple[TaskSpec, ...]
    edges: tuple[tuple[str, str], ...]
    retry_policy: RetryPolicy = RetryPolicy()
    schedule: str = "daily"

    def task(self, task_id: str) -> TaskSpec:
        for t in self.tasks:
            if t.task_id == task_id:
                return t
        raise UnknownTaskError(f"{self.dag_id} has no task {task_id!r}")

    def task_ids(self) -> list[str]:
        return [t.task_id for t in self.tasks]

    def upstream_of(self, task_id: str) -> set[str]:
        return {u for u, d in self.edges if d == task_id}

    def downstream_of(self, task_id: str) -> set[str]:
        return {d for u, d in self.edges if u == task_id}

    def transitive_downstream(self, task_id: str) -> set[str]:
        seen: set[str] = set()
        frontier = [task_id]
        while frontier:
            current = frontier.pop()
            for nxt in self.downstream_of(current):
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return seen

    def to_doc(self) -> dict:
        return {
            "dag_id": self.dag_id,
            "tasks": [t.to_doc() for t in self.tasks],
            "edges": [[u, d] for u, d in self.edges],
            "retry_policy": self.retry_policy.to_doc(),
            "schedule": self.schedule,
        }

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "DagSpec":
        return cls(
            dag_id=doc["dag_id"],
            tasks=tuple(TaskSpec.from_doc(t) for t in doc["tasks"]),
            edges=tuple((u, d) for u, d in doc.get("edges", [])),
            retry_policy=RetryPolicy.from_doc(doc.get("retry_policy", {})),
            schedule=doc.get("schedule", "daily"),
        )


def validate_dag(spec: DagSpec) -> list[str]:
    """Topological order of task ids. Rejects dangling edge endpoints and
    cycles (naming one). Declaration order breaks ties, so the result is
    stable across runs."""
    ids = spec.task_ids()
    if len(ids) != len(set(ids)):
        raise ValidationError(f"{spec.dag_id}: duplicate task ids")
    known = set(ids)
    for u, d in spec.edges:
        for endpoint in (u, d):
            if endpoint not in known:
                raise UnknownTaskError(f"{spec.dag_id}: edge references undeclared task {endpoint!r}")

    indegree = {t: 0 for t in ids}
    for _, d in set(spec.edges):
        indegree[d] += 1
    order: list[str] = []
    ready = [t for t in ids if indegree[t] == 0]
    remaining = dict(indegree)
    while ready:
        current = ready.pop(0)
        order.append(current)
        for nxt in sorted(spec.downstream_of(current), key=ids.index):
            remaining[nxt] -= 1
            if remaining[nxt] == 0:
                ready.append(nxt)
        ready.sort(key=ids.index)
    if len(order) != len(ids):
        stuck = [t for t in ids if t not in order]
        cycle = _find_cycle(spec, stuck)
        raise CycleError(cycle)
    return order


def _find_cycle(spec: DagSpec, candidates: list[str]) -> list[str]:
    start = candidates[0]
    path = [start]
    seen = {start}
    current = start
    while True:
        nexts = [d for d in sorted(spec.downstream_of(current)) if d in set(candidates)]
        if not nexts:
            return path
        current = nexts[0]
        if current in seen:
            return path[path.index(current):] + [current]
        seen.add(current)
        path.append(current)


def default_dag_spec(
    dag_id: str = "dora_daily",
    sources: tuple[SourceSystem, ...] = (SourceSystem.JIRA, SourceSystem.GITHUB, SourceSystem.JENKINS),
    retry_policy: RetryPolicy = RetryPolicy(),
) -> DagSpec:
    """The shipped daily pipeline: per-source extract behind a volume sensor,
    one normalization step, one aggregation step, one post-run check."""
    tasks: list[TaskSpec] = []
    edges: list[tuple[str, str]] = []
    for source in sources:
        extract_id = f"extract_{source.value}"
        sensor_id = f"sensor_{source.value}"
        tasks.append(TaskSpec(extract_id, TaskKind.EXTRACT, {"source": source.value}))
        tasks.append(TaskSpec(sensor_id, TaskKind.SENSOR, {"source": source.value}))
        edges.append((extract_id, sensor_id))
        edges.append((sensor_id, "transform"))
    tasks.append(TaskSpec("transform", TaskKind.TRANSFORM, {}))
    tasks.append(TaskSpec("aggregate", TaskKind.AGGREGATE, {}))
    tasks.append(TaskSpec("volume_check", TaskKind.VOLUME_CHECK, {}))
    edges.append(("transform", "aggregate"))
    edges.append(("aggregate", "volume_check"))
    return DagSpec(dag_id=dag_id, tasks=tuple(tasks), edges=tuple(edges), retry_policy=retry_policy)
