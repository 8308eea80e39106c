"""Legacy pull-model monitor, kept for the latency comparison.

The poller rescans Gold on a fixed period and diffs against its previous
snapshot, so a breach written just after a tick waits almost a full period.
The push consumer sees the same breach as soon as the change event lands.
Detection cost: pull pays wait-for-next-tick plus processing, push pays
processing alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from typing import Optional

from ..clock import Clock
from ..errors import ValidationError
from ..store.engine import MedallionStore
from .rules import Alert, AlertRule, evaluate_rule

_ALL_DAYS = (date(1970, 1, 1), date(2999, 12, 31))


@dataclass(frozen=True)
class PollerConfig:
    period: timedelta = timedelta(minutes=60)
    processing_delay: timedelta = timedelta(0)

    def __post_init__(self):
        if self.period <= timedelta(0):
            raise ValidationError("poll period must be positive")
        if self.processing_delay < timedelta(0):
            raise ValidationError("processing_delay must be >= 0")


class GoldPoller:
    """Full-scan poller: no change stream, no checkpoints, just a snapshot
    diff. Rows that are new or changed since the previous poll are evaluated
    against the rules; alerts go to the same sink the consumer uses."""

    def __init__(
        self,
        store: MedallionStore,
        rules,
        clock: Clock,
        config: PollerConfig = PollerConfig(),
    ):
        self.store = store
        self.rules = tuple(rules)
        self.clock = clock
        self.config = config
        self._seen: dict[tuple, float] = {}

    def poll_once(self) -> list[Alert]:
        """One tick: scan, diff, evaluate. Detection is stamped at scan time
        plus the configured processing delay."""
        fired_at = self.clock.now() + self.config.processing_delay
        alerts: list[Alert] = []
        for metric in self.store.query_gold(*_ALL_DAYS):
            key = (metric.date.isoformat(), metric.team_id, metric.metric_type.value)
            if self._seen.get(key) == metric.value:
                continue
            self._seen[key] = metric.value
            for rule in self.rules:
                alert = evaluate_rule(metric, rule, fired_at=fired_at)
                if alert is not None:
                    self.store.append_alert(alert.to_doc())
                    alerts.append(alert)
        return alerts


def next_poll_tick(anchor: datetime, period: timedelta, instant: datetime) -> datetime:
    """First tick of the (anchor + k*period) grid at or after ``instant``.
    A breach written exactly on a tick is caught by that same tick."""
    if instant <= anchor:
        return anchor
    elapsed = instant - anchor
    k = math.ceil(elapsed / period)
    return anchor + k * period


@dataclass(frozen=True)
class LatencyScenario:
    breach_written_at: datetime
    poll_period: timedelta = timedelta(minutes=60)
    processing_delay: timedelta = timedelta(0)
    poll_anchor: Optional[datetime] = None  # default: midnight of the breach day

    def anchor(self) -> datetime:
        if self.poll_anchor is not None:
            return self.poll_anchor
        return self.breach_written_at.replace(hour=0, minute=0, second=0, microsecond=0)


def measure_latency(scenario: LatencyScenario) -> dict[str, timedelta]:
    """Detection latency of both monitoring models for one breach.

    Pull waits for the next poll tick, then processes; push processes as soon
    as the change event is emitted. Both terms are simulated-clock exact.
    """
    tick = next_poll_tick(scenario.anchor(), scenario.poll_period, scenario.breach_written_at)
    pull = (tick - scenario.breach_written_at) + scenario.processing_delay
    push = scenario.processing_delay
    return {"pull_latency": pull, "push_latency": push}
