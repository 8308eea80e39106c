"""Resilient ELT pipeline for developer-productivity metrics.

Medallion storage (Bronze/Silver/Gold), state-based DAG orchestration with
retry/DLQ/backfill, fault-injectable source simulators, volume sentinels that
catch silent zero-record ingestion, and push-model alerting over a resumable
change stream.
"""

__version__ = "0.1.0"
