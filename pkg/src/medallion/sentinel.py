"""Data-volume guards.

Two checks share a 30-day moving-average baseline of per-source daily record
counts:

* a pre-transform hard gate that suspects a silent zero/low-volume fetch when
  today's count is more than 90% below the baseline, and
* a post-run anomaly check that flags any count more than two population
  standard deviations away from the baseline.

Both pass open (with a warning) until at least ``min_history`` days of
baseline exist, and the baseline is only ever fed by successful, non-halted
runs, so a bad day never poisons it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from datetime import date
from enum import Enum
from typing import Sequence

logger = logging.getLogger(__name__)

DEFAULT_WINDOW_DAYS = 30
DEFAULT_MIN_HISTORY = 7
DEFAULT_DROP_FACTOR = 0.10
DEFAULT_SIGMA_FACTOR = 2.0

VolumeHistory = Sequence[tuple[date, int]]  # ascending dates, one entry per date


@dataclass(frozen=True)
class InsufficientHistory:
    """Baseline has fewer than min_history entries; checks pass open."""

    available: int
    required: int


class GateVerdict(str, Enum):
    PASS = "pass"
    PHANTOM_ZERO_SUSPECTED = "phantom_zero_suspected"


class CheckVerdict(str, Enum):
    PASS = "pass"
    VOLUME_ANOMALY = "volume_anomaly"


@dataclass(frozen=True)
class GateResult:
    verdict: GateVerdict
    fetched_count: int
    moving_average: float | None
    threshold: float | None
    reason: str

    @property
    def passed(self) -> bool:
        return self.verdict is GateVerdict.PASS


@dataclass(frozen=True)
class CheckResult:
    verdict: CheckVerdict
    processed_count: int
    moving_average: float | None
    sigma: float | None
    reason: str

    @property
    def passed(self) -> bool:
        return self.verdict is CheckVerdict.PASS


def _window(history: VolumeHistory, as_of_date: date, window_days: int) -> list[int]:
    counts = [c for d, c in history if d < as_of_date]
    return counts[-window_days:]


def moving_average(
    history: VolumeHistory,
    as_of_date: date,
    *,
    window_days: int = DEFAULT_WINDOW_DAYS,
    min_history: int = DEFAULT_MIN_HISTORY,
) -> float | InsufficientHistory:
    """Mean of up to the ``window_days`` most recent counts strictly before
    ``as_of_date``; InsufficientHistory below ``min_history`` entries."""
    counts = _window(history, as_of_date, window_days)
    if len(counts) < min_history:
        return InsufficientHistory(available=len(counts), required=min_history)
    return sum(counts) / len(counts)


def volume_gate_pre(
    fetched_count: int,
    history: VolumeHistory,
    as_of_date: date,
    *,
    drop_factor: float = DEFAULT_DROP_FACTOR,
    window_days: int = DEFAULT_WINDOW_DAYS,
    min_history: int = DEFAULT_MIN_HISTORY,
) -> GateResult:
    """Hard gate between extract and transform.

    Trips iff fetched_count < drop_factor * moving_average (strict: a count
    exactly at the threshold passes).
    """
    ma = moving_average(history, as_of_date, window_days=window_days, min_history=min_history)
    if isinstance(ma, InsufficientHistory):
        logger.info(
            "volume gate passing open: only %d/%d history days as of %s",
            ma.available, ma.required, as_of_date,
        )
        return GateResult(
            verdict=GateVerdict.PASS,
            fetched_count=fetched_count,
            moving_average=None,
            threshold=None,
            reason=f"insufficient history ({ma.available}/{ma.required} days), gate passes open",
        )
    threshold = drop_factor * ma
    if fetched_count < threshold:
        return GateResult(
            verdict=GateVerdict.PHANTOM_ZERO_SUSPECTED,
            fetched_count=fetched_count,
            moving_average=ma,
            threshold=threshold,
            reason=(
                f"fetched {fetched_count} records, more than "
                f"{(1 - drop_factor) * 100:.0f}% below the {len(_window(history, as_of_date, window_days))}-day "
                f"moving average {ma:.2f}"
            ),
        )
    return GateResult(
        verdict=GateVerdict.PASS,
        fetched_count=fetched_count,
        moving_average=ma,
        threshold=threshold,
        reason=f"fetched {fetched_count} >= threshold {threshold:.2f}",
    )


def population_stddev(counts: Sequence[int]) -> float:
    mean = sum(counts) / len(counts)
    return math.sqrt(sum((c - mean) ** 2 for c in counts) / len(counts))


def volume_check_post(
    processed_count: int,
    history: VolumeHistory,
    as_of_date: date,
    *,
    sigma_factor: float = DEFAULT_SIGMA_FACTOR,
    window_days: int = DEFAULT_WINDOW_DAYS,
    min_history: int = DEFAULT_MIN_HISTORY,
) -> CheckResult:
    """Post-run deviation check: anomaly iff |count - MA| > sigma_factor * sigma.

    With a degenerate window (sigma == 0) any count different from the mean is
    an anomaly. This check alerts but never rolls the run back.
    """
    counts = _window(history, as_of_date, window_days)
    if len(counts) < min_history:
        logger.info(
            "volume check passing open: only %d/%d history days as of %s",
            len(counts), min_history, as_of_date,
        )
        return CheckResult(
            verdict=CheckVerdict.PASS,
            processed_count=processed_count,
            moving_average=None,
            sigma=None,
            reason=f"insufficient history ({len(counts)}/{min_history} days), check passes open",
        )
    ma = sum(counts) / len(counts)
    sigma = population_stddev(counts)
    deviation = abs(processed_count - ma)
    if sigma == 0:
        anomalous = deviation != 0
    else:
        anomalous = deviation > sigma_factor * sigma
    if anomalous:
        return CheckResult(
            verdict=CheckVerdict.VOLUME_ANOMALY,
            processed_count=processed_count,
            moving_average=ma,
            sigma=sigma,
            reason=(
                f"processed {processed_count} deviates {deviation:.2f} from the moving average "
                f"{ma:.2f} (limit {sigma_factor} x sigma = {sigma_factor * sigma:.2f})"
            ),
        )
    return CheckResult(
        verdict=CheckVerdict.PASS,
        processed_count=processed_count,
        moving_average=ma,
        sigma=sigma,
        reason=f"processed {processed_count} within {sigma_factor} sigma of {ma:.2f}",
    )
