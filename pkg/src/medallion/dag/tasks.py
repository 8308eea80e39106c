"""Built-in task kinds.

Each body takes a TaskContext and returns a telemetry dict; failures are
raised and classified by the scheduler (RetryableError retries with backoff,
anything else fails the task fast). Sensor trips raise SensorTripped, which
the scheduler maps to a failed task and a halted run rather than an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Any, TYPE_CHECKING

from ..errors import MedallionError
from ..sentinel import GateResult, volume_check_post, volume_gate_pre
from ..settings import PipelineSettings
from ..sources.simulator import SourceHub
from ..store.engine import MedallionStore
from ..store.types import SourceSystem, fmt_instant
from ..transforms import Drop, TransformTelemetry, daily_metrics, to_silver
from .spec import DagSpec, TaskKind, TaskSpec

if TYPE_CHECKING:
    from ..clock import Clock


class SensorTripped(MedallionError):
    """A volume gate refused to let the run continue."""

    def __init__(self, result: GateResult, source: SourceSystem):
        self.result = result
        self.source = source
        super().__init__(f"PhantomZeroSuspected: {source.value}: {result.reason}")


@dataclass
class TaskContext:
    store: MedallionStore
    hub: SourceHub
    clock: "Clock"
    settings: PipelineSettings
    dag: DagSpec
    run_id: str
    logical_date: date
    task: TaskSpec
    attempt: int
    from_silver: bool
    task_telemetry: dict[str, dict] = field(default_factory=dict)  # finished tasks' telemetry

    def source(self) -> SourceSystem:
        return SourceSystem(self.task.params["source"])


def run_task(ctx: TaskContext) -> dict[str, Any]:
    if ctx.from_silver and ctx.task.kind is not TaskKind.AGGREGATE:
        # Backfills recompute Gold from existing Silver; nothing upstream of
        # aggregation has work to do and no connector may be touched.
        return {"skipped": "from_silver"}
    body = _BODIES[ctx.task.kind]
    return body(ctx)


def _extract(ctx: TaskContext) -> dict[str, Any]:
    source = ctx.source()
    credential = ctx.hub.credential(source, attempt=ctx.attempt)
    records: list[dict] = []
    page_index = 0
    while True:
        page = ctx.hub.fetch_page(source, ctx.logical_date, page_index, credential)
        ctx.store.append_bronze(
            payload={
                "source_system": source.value,
                "logical_date": ctx.logical_date.isoformat(),
                "page_index": page.page_index,
                "records": list(page.records),
                "has_next": page.has_next,
            },
            fetched_at=ctx.clock.now(),
            source_system=source,
            execution_id=ctx.run_id,
        )
        records.extend(page.records)
        if not page.has_next:
            break
        page_index += 1
    # Raw pages are already on disk (load before transform); only now do we
    # insist the payloads still look like what the parsers expect.
    source_schema = ctx.settings.schema.for_source(source)
    for item in records:
        source_schema.validate_item(item)
    return {"source": source.value, "fetched_count": len(records), "pages": page_index + 1}


def _sensor(ctx: TaskContext) -> dict[str, Any]:
    source = ctx.source()
    extract_telemetry = _upstream_extract_telemetry(ctx, source)
    fetched = int(extract_telemetry["fetched_count"])
    if not ctx.settings.sensors_enabled:
        return {"source": source.value, "fetched_count": fetched, "verdict": "sensors_disabled"}
    cfg = ctx.settings.sentinel
    result = volume_gate_pre(
        fetched,
        ctx.store.volume_history(source),
        ctx.logical_date,
        drop_factor=cfg.drop_factor,
        window_days=cfg.window_days,
        min_history=cfg.min_history,
    )
    if not result.passed:
        ctx.store.append_alert({
            "alert_key": {
                "rule_id": f"sentinel:phantom_zero:{source.value}",
                "date": ctx.logical_date.isoformat(),
                "team_id": "",
            },
            "fired_at": fmt_instant(ctx.clock.now()),
            "triggering_token": None,
            "value": float(fetched),
            "kind": "phantom_zero_suspected",
            "message": result.reason,
            "run_id": ctx.run_id,
        })
        raise SensorTripped(result, source)
    return {
        "source": source.value,
        "fetched_count": fetched,
        "verdict": result.verdict.value,
        "moving_average": result.moving_average,
        "reason": result.reason,
    }


def _transform(ctx: TaskContext) -> dict[str, Any]:
    telemetry = TransformTelemetry()
    processed: dict[str, set] = {s.value: set() for s in SourceSystem}
    for bronze in ctx.store.query_bronze(execution_id=ctx.run_id):
        payload = bronze.payload
        source = SourceSystem(payload["source_system"])
        for item in payload.get("records", []):
            got = to_silver(
                item, source, ctx.settings.schema, ctx.settings.identity,
                ctx.settings.filters, telemetry,
            )
            if isinstance(got, Drop):
                continue
            ctx.store.upsert_silver(got)
            processed[source.value].add(got.event_key.as_tuple())
    by_source = {s: len(keys) for s, keys in processed.items()}
    return {
        "processed_count": sum(by_source.values()),
        "processed_by_source": by_source,
        **telemetry.to_doc(),
    }


def _aggregate(ctx: TaskContext) -> dict[str, Any]:
    lookback = timedelta(days=ctx.settings.aggregate_lookback_days)
    events = ctx.store.query_silver(
        date_from=ctx.logical_date - lookback,
        date_to=ctx.logical_date,
    )
    telemetry = TransformTelemetry()
    written = 0
    outcomes = {"inserted": 0, "replaced": 0}
    for team in ctx.settings.teams:
        for metric in daily_metrics(
            events, ctx.logical_date, team,
            computed_at=ctx.clock.now(),
            execution_id=ctx.run_id,
            config=ctx.settings.metric,
            telemetry=telemetry,
        ):
            outcome, _ = ctx.store.upsert_gold(metric)
            outcomes[outcome.value] += 1
            written += 1
    return {
        "gold_written": written,
        "gold_outcomes": outcomes,
        "teams": len(ctx.settings.teams),
        "silver_events_read": len(events),
        "unresolvable_commits": telemetry.unresolvable_commits,
        "orphan_resolutions": telemetry.orphan_resolutions,
    }


def _volume_check(ctx: TaskContext) -> dict[str, Any]:
    if not ctx.settings.sensors_enabled:
        return {"verdict": "sensors_disabled"}
    transform_telemetry = _task_telemetry_of_kind(ctx, TaskKind.TRANSFORM)
    by_source = transform_telemetry.get("processed_by_source", {})
    cfg = ctx.settings.sentinel
    verdicts = {}
    anomalies = 0
    for source in SourceSystem:
        count = int(by_source.get(source.value, 0))
        result = volume_check_post(
            count,
            ctx.store.volume_history(source),
            ctx.logical_date,
            sigma_factor=cfg.sigma_factor,
            window_days=cfg.window_days,
            min_history=cfg.min_history,
        )
        verdicts[source.value] = result.verdict.value
        if not result.passed:
            anomalies += 1
            # Alert only: the post-check never rolls a finished run back.
            ctx.store.append_alert({
                "alert_key": {
                    "rule_id": f"sentinel:volume_anomaly:{source.value}",
                    "date": ctx.logical_date.isoformat(),
                    "team_id": "",
                },
                "fired_at": fmt_instant(ctx.clock.now()),
                "triggering_token": None,
                "value": float(count),
                "kind": "volume_anomaly",
                "message": result.reason,
                "run_id": ctx.run_id,
            })
    return {"verdicts": verdicts, "anomalies": anomalies}


def _upstream_extract_telemetry(ctx: TaskContext, source: SourceSystem) -> dict:
    for task in ctx.dag.tasks:
        if task.kind is TaskKind.EXTRACT and task.params.get("source") == source.value:
            telemetry = ctx.task_telemetry.get(task.task_id)
            if telemetry is None:
                raise MedallionError(
                    f"sensor {ctx.task.task_id}: extract telemetry for {source.value} not available"
                )
            return telemetry
    raise MedallionError(f"sensor {ctx.task.task_id}: no extract task for source {source.value}")


def _task_telemetry_of_kind(ctx: TaskContext, kind: TaskKind) -> dict:
    for task in ctx.dag.tasks:
        if task.kind is kind and task.task_id in ctx.task_telemetry:
            return ctx.task_telemetry[task.task_id]
    return {}


_BODIES = {
    TaskKind.EXTRACT: _extract,
    TaskKind.SENSOR: _sensor,
    TaskKind.TRANSFORM: _transform,
    TaskKind.AGGREGATE: _aggregate,
    TaskKind.VOLUME_CHECK: _volume_check,
}
