"""Pipeline-level configuration shared by tasks, sentinels, and the API.

Kept separate from the YAML loading code so the orchestrator can depend on
these types without dragging file formats along.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import timedelta
from typing import Any, Mapping

from .sentinel import (
    DEFAULT_DROP_FACTOR,
    DEFAULT_MIN_HISTORY,
    DEFAULT_SIGMA_FACTOR,
    DEFAULT_WINDOW_DAYS,
)
from .store.types import SourceSystem
from .transforms import (
    FilterRules,
    IdentityMap,
    MetricConfig,
    SilverSchema,
    default_silver_schema,
)


@dataclass(frozen=True)
class SentinelConfig:
    drop_factor: float = DEFAULT_DROP_FACTOR
    sigma_factor: float = DEFAULT_SIGMA_FACTOR
    min_history: int = DEFAULT_MIN_HISTORY
    window_days: int = DEFAULT_WINDOW_DAYS

    def to_doc(self) -> dict:
        return {
            "drop_factor": self.drop_factor,
            "sigma_factor": self.sigma_factor,
            "min_history": self.min_history,
            "window_days": self.window_days,
        }

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "SentinelConfig":
        return cls(
            drop_factor=float(doc.get("drop_factor", DEFAULT_DROP_FACTOR)),
            sigma_factor=float(doc.get("sigma_factor", DEFAULT_SIGMA_FACTOR)),
            min_history=int(doc.get("min_history", DEFAULT_MIN_HISTORY)),
            window_days=int(doc.get("window_days", DEFAULT_WINDOW_DAYS)),
        )


@dataclass(frozen=True)
class PipelineSettings:
    """Everything task bodies need beyond the store and the connectors."""

    teams: tuple[str, ...]
    schema: SilverSchema = field(default_factory=default_silver_schema)
    identity: IdentityMap = field(default_factory=lambda: IdentityMap({}))
    filters: FilterRules = field(default_factory=FilterRules)
    metric: MetricConfig = field(default_factory=MetricConfig)
    sentinel: SentinelConfig = field(default_factory=SentinelConfig)
    # Legacy mode: volume sensors and post-checks become no-ops. This is the
    # configuration whose blind spot the sentinels exist to close.
    sensors_enabled: bool = True
    # How far back the aggregate step reads Silver, so deploys can resolve
    # commits and resolutions can find their opens from previous days.
    aggregate_lookback_days: int = 7

    def with_schema(self, schema: SilverSchema) -> "PipelineSettings":
        return replace(self, schema=schema)

    def to_doc(self) -> dict:
        return {
            "teams": list(self.teams),
            "schema": self.schema.to_doc(),
            "identity": self.identity.to_doc(),
            "filters": self.filters.to_doc(),
            "attribution_window_hours": self.metric.attribution_window.total_seconds() / 3600.0,
            "sentinel": self.sentinel.to_doc(),
            "sensors_enabled": self.sensors_enabled,
            "aggregate_lookback_days": self.aggregate_lookback_days,
        }

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "PipelineSettings":
        window_hours = float(doc.get("attribution_window_hours", 24.0))
        return cls(
            teams=tuple(doc["teams"]),
            schema=SilverSchema.from_doc(doc["schema"]) if "schema" in doc else default_silver_schema(),
            identity=IdentityMap.from_doc(doc.get("identity", {})),
            filters=FilterRules.from_doc(doc.get("filters", {})),
            metric=MetricConfig(attribution_window=timedelta(hours=window_hours)),
            sentinel=SentinelConfig.from_doc(doc.get("sentinel", {})),
            sensors_enabled=bool(doc.get("sensors_enabled", True)),
            aggregate_lookback_days=int(doc.get("aggregate_lookback_days", 7)),
        )


SOURCE_ORDER = (SourceSystem.JIRA, SourceSystem.GITHUB, SourceSystem.JENKINS)
