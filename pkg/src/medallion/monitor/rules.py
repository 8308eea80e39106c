"""Threshold rules evaluated against Gold metric rows.

Evaluation is pure: a rule either matches a metric row and fires an Alert, or
it doesn't. Delivery, dedup, and checkpointing live in the consumer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, datetime
from enum import Enum
from typing import Any, Mapping, Optional

from ..errors import ValidationError
from ..store.types import GoldMetric, MetricType, fmt_instant, parse_day, parse_instant


class Comparator(str, Enum):
    GT = "gt"
    LT = "lt"
    GTE = "gte"
    LTE = "lte"

    def holds(self, value: float, threshold: float) -> bool:
        if self is Comparator.GT:
            return value > threshold
        if self is Comparator.LT:
            return value < threshold
        if self is Comparator.GTE:
            return value >= threshold
        return value <= threshold


@dataclass(frozen=True)
class AlertRule:
    rule_id: str
    metric_type: MetricType
    comparator: Comparator
    threshold: float
    scope: Optional[str] = None  # team_id; None applies to every team

    def __post_init__(self):
        if not math.isfinite(self.threshold):
            raise ValidationError(f"rule {self.rule_id}: threshold must be finite")

    def to_doc(self) -> dict:
        doc = {
            "rule_id": self.rule_id,
            "metric_type": self.metric_type.value,
            "comparator": self.comparator.value,
            "threshold": self.threshold,
        }
        if self.scope is not None:
            doc["scope"] = self.scope
        return doc

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "AlertRule":
        return cls(
            rule_id=doc["rule_id"],
            metric_type=MetricType(doc["metric_type"]),
            comparator=Comparator(doc["comparator"]),
            threshold=float(doc["threshold"]),
            scope=doc.get("scope"),
        )


@dataclass(frozen=True)
class Alert:
    rule_id: str
    date: date
    team_id: str
    fired_at: datetime
    value: float
    triggering_token: Optional[int] = None
    kind: str = "threshold_breach"
    message: str = ""
    metric_type: str = ""

    @property
    def alert_key(self) -> tuple[str, str, str]:
        return (self.rule_id, self.date.isoformat(), self.team_id)

    def to_doc(self) -> dict:
        return {
            "alert_key": {
                "rule_id": self.rule_id,
                "date": self.date.isoformat(),
                "team_id": self.team_id,
            },
            "fired_at": fmt_instant(self.fired_at),
            "triggering_token": self.triggering_token,
            "value": self.value,
            "kind": self.kind,
            "message": self.message,
            "metric_type": self.metric_type,
        }

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "Alert":
        key = doc["alert_key"]
        return cls(
            rule_id=key["rule_id"],
            date=parse_day(key["date"]),
            team_id=key["team_id"],
            fired_at=parse_instant(doc["fired_at"]),
            value=float(doc["value"]),
            triggering_token=doc.get("triggering_token"),
            kind=doc.get("kind", "threshold_breach"),
            message=doc.get("message", ""),
            metric_type=doc.get("metric_type", ""),
        )


def evaluate_rule(
    metric: GoldMetric,
    rule: AlertRule,
    *,
    fired_at: datetime,
    triggering_token: Optional[int] = None,
) -> Optional[Alert]:
    """Alert iff the rule targets this metric type and team and the threshold
    comparison holds. Strict comparators stay strict: 0.15 is not > 0.15."""
    if metric.metric_type is not rule.metric_type:
        return None
    if rule.scope is not None and rule.scope != metric.team_id:
        return None
    if not rule.comparator.holds(metric.value, rule.threshold):
        return None
    return Alert(
        rule_id=rule.rule_id,
        date=metric.date,
        team_id=metric.team_id,
        fired_at=fired_at,
        value=metric.value,
        triggering_token=triggering_token,
        message=(
            f"{metric.metric_type.value}={metric.value:g} "
            f"{rule.comparator.value} {rule.threshold:g} for {metric.team_id} on {metric.date}"
        ),
        metric_type=metric.metric_type.value,
    )


def default_rules() -> tuple[AlertRule, ...]:
    """Out-of-the-box alerting: change failure rate above 15%."""
    return (
        AlertRule(
            rule_id="cfr_above_15pct",
            metric_type=MetricType.CHANGE_FAILURE_RATE,
            comparator=Comparator.GT,
            threshold=0.15,
        ),
    )
