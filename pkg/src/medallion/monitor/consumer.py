"""Push-model alert consumer over the Gold change stream.

Ordering is the whole contract here: the alert is written to the sink first,
the checkpoint second. A crash between the two replays the event on restart
and the sink's key dedup swallows the duplicate, so delivery is at-least-once
with effectively-once alerting.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from datetime import timedelta
from typing import Optional, Sequence

from ..clock import Clock
from ..errors import CrashInjected, ResumeTokenError
from ..store.engine import MedallionStore
from ..store.types import ChangeEvent, GoldMetric
from .rules import AlertRule, evaluate_rule

logger = logging.getLogger(__name__)


@dataclass
class ConsumerStats:
    processed: int = 0
    delivered: int = 0
    suppressed: int = 0
    last_token: int = 0
    tokens_seen: list[int] = field(default_factory=list)


class AlertConsumer:
    """Single-owner subscription: one live consumer per consumer_id.

    ``crash_after_sink_at`` injects a fault between the sink write and the
    checkpoint write for the given token; ``stop_after_checkpoint`` shuts the
    consumer down cleanly right after checkpointing that token. Both exist so
    crash/restart schedules can be scripted deterministically.
    """

    def __init__(
        self,
        consumer_id: str,
        store: MedallionStore,
        rules: Sequence[AlertRule],
        clock: Clock,
        *,
        processing_delay: timedelta = timedelta(0),
        crash_after_sink_at: Optional[int] = None,
        stop_after_checkpoint: Optional[int] = None,
    ):
        self.consumer_id = consumer_id
        self.store = store
        self.rules = tuple(rules)
        self.clock = clock
        self.processing_delay = processing_delay
        self.crash_after_sink_at = crash_after_sink_at
        self.stop_after_checkpoint = stop_after_checkpoint
        self.stats = ConsumerStats()

    def starting_token(self) -> int:
        """Checkpointed cursor, or 0 when absent or no longer replayable."""
        checkpoint = self.store.read_checkpoint(self.consumer_id)
        if checkpoint is None:
            return 0
        token = int(checkpoint["last_processed_token"])
        try:
            self.store.read_changes(token)
        except ResumeTokenError:
            logger.warning(
                "consumer %s: checkpoint token %s unknown to the log; "
                "restarting from 0 and relying on alert dedup",
                self.consumer_id, token,
            )
            self.store.clear_checkpoint(self.consumer_id)
            return 0
        return token

    def drain(self) -> int:
        """Process the backlog in token order until caught up (or a scripted
        stop/crash fires). Returns the number of events processed."""
        cursor = self.starting_token()
        processed = 0
        while True:
            batch = self.store.read_changes(cursor)
            if not batch:
                return processed
            for event in batch:
                self._process(event)
                cursor = event.token
                processed += 1
                if self.stop_after_checkpoint is not None and event.token >= self.stop_after_checkpoint:
                    return processed

    def run(self, stop_event: threading.Event, poll_seconds: float = 0.02) -> None:
        """Blocking live loop for serving mode; drain() is the test surface."""
        cursor = self.starting_token()
        for event in self.store.subscribe_changes(
            after_token=cursor, stop_event=stop_event, poll_seconds=poll_seconds
        ):
            self._process(event)
            if stop_event.is_set():
                return

    def _process(self, event: ChangeEvent) -> None:
        metric = GoldMetric.from_doc(event.document)
        fired_at = self.clock.now() + self.processing_delay
        for rule in self.rules:
            alert = evaluate_rule(
                metric, rule, fired_at=fired_at, triggering_token=event.token
            )
            if alert is None:
                continue
            delivered = self.store.append_alert(alert.to_doc())
            if delivered:
                self.stats.delivered += 1
            else:
                self.stats.suppressed += 1
            if self.crash_after_sink_at is not None and event.token == self.crash_after_sink_at:
                raise CrashInjected(
                    f"consumer {self.consumer_id} crashed after sink write for "
                    f"token {event.token}, before checkpoint"
                )
        self.store.write_checkpoint(self.consumer_id, event.token, self.clock.now())
        self.stats.processed += 1
        self.stats.last_token = event.token
        self.stats.tokens_seen.append(event.token)
