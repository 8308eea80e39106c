"""Retry delay schedule: doubling from the base, capped."""

from __future__ import annotations

from datetime import timedelta

from ..errors import ValidationError


def compute_backoff(attempt: int, base_delay: timedelta, max_delay: timedelta) -> timedelta:
    """Delay scheduled after failed attempt number `attempt` (1-based)."""
    if attempt < 1:
        raise ValidationError(f"attempt must be >= 1, got {attempt}")
    if base_delay < timedelta(0) or max_delay < base_delay:
        raise ValidationError("need 0 <= base_delay <= max_delay")
    return min(base_delay * (2 ** (attempt - 1)), max_delay)
