from .engine import MedallionStore
from .types import (
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
)

__all__ = [
    "MedallionStore",
    "BronzeRecord",
    "BucketStats",
    "ChangeEvent",
    "ChangeOp",
    "EventKey",
    "EventType",
    "GoldMetric",
    "MetricType",
    "SilverEvent",
    "SourceSystem",
    "UpsertOutcome",
]
