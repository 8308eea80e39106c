"""Expiring-credential provider.

Tasks are expected to fetch a fresh token at the start of every attempt
rather than caching one across a long run; the provider hands out tokens
with a fixed TTL measured on the injected clock.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from datetime import datetime, timedelta

from ..clock import Clock

DEFAULT_TTL = timedelta(minutes=60)


@dataclass(frozen=True)
class Credential:
    token: str
    expires_at: datetime

    def valid_at(self, instant: datetime) -> bool:
        return instant < self.expires_at


class CredentialProvider:
    """Always-up simulated secrets service. Every call rotates the token."""

    def __init__(self, clock: Clock, ttl: timedelta = DEFAULT_TTL):
        if ttl <= timedelta(0):
            raise ValueError("credential TTL must be positive")
        self._clock = clock
        self._ttl = ttl
        self._lock = threading.Lock()
        self._issued = 0

    @property
    def ttl(self) -> timedelta:
        return self._ttl

    def get_credential(self) -> Credential:
        with self._lock:
            self._issued += 1
            serial = self._issued
        return Credential(token=f"tok-{serial:06d}", expires_at=self._clock.now() + self._ttl)
