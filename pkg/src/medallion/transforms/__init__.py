from .metrics import (
    DEFAULT_ATTRIBUTION_WINDOW,
    MetricConfig,
    compute_change_failure_rate,
    compute_deployment_frequency,
    compute_lead_time_median,
    compute_mttr,
    daily_metrics,
)
from .normalize import (
    Drop,
    FilterRules,
    IdentityMap,
    SilverSchema,
    SourceSchema,
    TimestampEncoding,
    TransformTelemetry,
    default_silver_schema,
    normalize_timestamp,
    resolve_identity,
    to_silver,
)

__all__ = [
    "DEFAULT_ATTRIBUTION_WINDOW",
    "Drop",
    "FilterRules",
    "IdentityMap",
    "MetricConfig",
    "SilverSchema",
    "SourceSchema",
    "TimestampEncoding",
    "TransformTelemetry",
    "compute_change_failure_rate",
    "compute_deployment_frequency",
    "compute_lead_time_median",
    "compute_mttr",
    "daily_metrics",
    "default_silver_schema",
    "normalize_timestamp",
    "resolve_identity",
    "to_silver",
]
