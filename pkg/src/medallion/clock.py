"""Injectable clocks. Every component takes a clock; nothing reads wall time directly."""

from __future__ import annotations

import threading
from datetime import datetime, timedelta, timezone


def utc(year: int, month: int, day: int, hour: int = 0, minute: int = 0, second: int = 0) -> datetime:
    """Shorthand for a tz-aware UTC instant."""
    return datetime(year, month, day, hour, minute, second, tzinfo=timezone.utc)


def ensure_utc(dt: datetime) -> datetime:
    """Normalize any aware datetime to UTC; reject naive ones."""
    if dt.tzinfo is None:
        raise ValueError(f"naive datetime not allowed: {dt!r}")
    return dt.astimezone(timezone.utc)


class Clock:
    """Interface: now() returns the current UTC instant."""

    def now(self) -> datetime:
        raise NotImplementedError


class SystemClock(Clock):
    def now(self) -> datetime:
        return datetime.now(tz=timezone.utc)


class SimClock(Clock):
    """Manually advanced simulated clock.

    Thread-safe; time only moves when advance()/advance_to() is called.
    The DAG engine advances it in discrete-event fashion when every
    runnable task is waiting on a retry delay.
    """

    def __init__(self, start: datetime):
        self._now = ensure_utc(start)
        self._lock = threading.Lock()

    def now(self) -> datetime:
        with self._lock:
            return self._now

    def advance(self, seconds: float = 0, *, minutes: float = 0, hours: float = 0, days: float = 0) -> datetime:
        delta = timedelta(seconds=seconds, minutes=minutes, hours=hours, days=days)
        if delta < timedelta(0):
            raise ValueError("clock cannot move backwards")
        with self._lock:
            self._now = self._now + delta
            return self._now

    def advance_to(self, instant: datetime) -> datetime:
        instant = ensure_utc(instant)
        with self._lock:
            if instant < self._now:
                raise ValueError(f"clock cannot move backwards: {instant} < {self._now}")
            self._now = instant
            return self._now
