"""Daily DORA metric computation over a Silver snapshot.

All four computations are pure functions of (events, date, team, config), so
re-running them over unchanged Silver reproduces Gold bit for bit, and
backfill can evaluate (date, team) partitions concurrently.

Conventions this module commits to:
  * deployment_frequency is always a value, zero included; whether a zero is
    trustworthy is the volume sentinel's question, not this one's.
  * the other three metrics return None on an empty denominator. No Gold
    record is written for them that day; absence of data is not zero.
  * a deployment counts as failed when an incident_opened for the same team
    lands within the attribution window after it, boundaries inclusive.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from typing import Iterable, Sequence

from ..store.types import EventType, GoldMetric, MetricType, SilverEvent
from .normalize import TransformTelemetry

DEFAULT_ATTRIBUTION_WINDOW = timedelta(hours=24)

MINUTE = 60.0


def _deployments(events: Iterable[SilverEvent], day: date, team_id: str) -> list[SilverEvent]:
    return [
        e for e in events
        if e.event_type is EventType.DEPLOYMENT
        and e.team_id == team_id
        and e.occurred_at.date() == day
    ]


def compute_deployment_frequency(
    events: Sequence[SilverEvent], day: date, team_id: str
) -> float:
    return float(len(_deployments(events, day, team_id)))


def compute_lead_time_median(
    events: Sequence[SilverEvent],
    day: date,
    team_id: str,
    telemetry: TransformTelemetry | None = None,
) -> float | None:
    """Median commit-to-deploy time in minutes over the day's deployments.
    Even counts take the mean of the two middle values. Deployments whose
    linked commit is missing from Silver are excluded and counted."""
    commits_by_sha: dict[str, datetime] = {
        e.attributes["commit_sha"]: e.occurred_at
        for e in events
        if e.event_type is EventType.COMMIT and "commit_sha" in e.attributes
    }
    lead_times = []
    for deploy in _deployments(events, day, team_id):
        sha = deploy.attributes.get("linked_commit_sha")
        committed_at = commits_by_sha.get(sha) if sha else None
        if committed_at is None:
            if telemetry is not None:
                telemetry.unresolvable_commits += 1
            continue
        lead_times.append((deploy.occurred_at - committed_at).total_seconds() / MINUTE)
    if not lead_times:
        return None
    return float(statistics.median(lead_times))


def compute_change_failure_rate(
    events: Sequence[SilverEvent],
    day: date,
    team_id: str,
    attribution_window: timedelta = DEFAULT_ATTRIBUTION_WINDOW,
) -> float | None:
    deployments = _deployments(events, day, team_id)
    if not deployments:
        return None
    incident_times = [
        e.occurred_at
        for e in events
        if e.event_type is EventType.INCIDENT_OPENED and e.team_id == team_id
    ]
    failed = 0
    for deploy in deployments:
        deadline = deploy.occurred_at + attribution_window
        if any(deploy.occurred_at <= opened <= deadline for opened in incident_times):
            failed += 1
    return failed / len(deployments)


def compute_mttr(
    events: Sequence[SilverEvent],
    day: date,
    team_id: str,
    telemetry: TransformTelemetry | None = None,
) -> float | None:
    """Mean minutes-to-resolve over incidents resolved on the day. Pairs
    open/resolve via the shared incident id; a resolution with no matching
    open is skipped and counted."""
    opened_at: dict[str, datetime] = {}
    for e in events:
        if e.event_type is EventType.INCIDENT_OPENED and e.team_id == team_id:
            incident_id = e.attributes.get("incident_id")
            if incident_id is not None:
                prior = opened_at.get(incident_id)
                if prior is None or e.occurred_at < prior:
                    opened_at[incident_id] = e.occurred_at
    durations = []
    for e in events:
        if (
            e.event_type is EventType.INCIDENT_RESOLVED
            and e.team_id == team_id
            and e.occurred_at.date() == day
        ):
            incident_id = e.attributes.get("incident_id")
            started = opened_at.get(incident_id) if incident_id is not None else None
            if started is None:
                if telemetry is not None:
                    telemetry.orphan_resolutions += 1
                continue
            durations.append((e.occurred_at - started).total_seconds() / MINUTE)
    if not durations:
        return None
    return statistics.fmean(durations)


@dataclass(frozen=True)
class MetricConfig:
    attribution_window: timedelta = DEFAULT_ATTRIBUTION_WINDOW


def daily_metrics(
    events: Sequence[SilverEvent],
    day: date,
    team_id: str,
    *,
    computed_at: datetime,
    execution_id: str,
    config: MetricConfig = MetricConfig(),
    telemetry: TransformTelemetry | None = None,
) -> list[GoldMetric]:
    """All Gold records for one (date, team) partition, in stable order."""

    def gold(metric_type: MetricType, value: float) -> GoldMetric:
        return GoldMetric(
            date=day,
            team_id=team_id,
            metric_type=metric_type,
            value=value,
            computed_at=computed_at,
            execution_id=execution_id,
        )

    out = [gold(MetricType.DEPLOYMENT_FREQUENCY, compute_deployment_frequency(events, day, team_id))]
    lead_time = compute_lead_time_median(events, day, team_id, telemetry)
    if lead_time is not None:
        out.append(gold(MetricType.LEAD_TIME_MEDIAN, lead_time))
    cfr = compute_change_failure_rate(events, day, team_id, config.attribution_window)
    if cfr is not None:
        out.append(gold(MetricType.CHANGE_FAILURE_RATE, cfr))
    mttr = compute_mttr(events, day, team_id, telemetry)
    if mttr is not None:
        out.append(gold(MetricType.MTTR, mttr))
    return out
