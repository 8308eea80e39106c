from .consumer import AlertConsumer, ConsumerStats
from .poller import GoldPoller, LatencyScenario, PollerConfig, measure_latency, next_poll_tick
from .rules import Alert, AlertRule, Comparator, default_rules, evaluate_rule

__all__ = [
    "Alert",
    "AlertConsumer",
    "AlertRule",
    "Comparator",
    "ConsumerStats",
    "GoldPoller",
    "LatencyScenario",
    "PollerConfig",
    "default_rules",
    "evaluate_rule",
    "measure_latency",
    "next_poll_tick",
]
