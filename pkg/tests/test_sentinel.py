"""Volume guard math, pinned against hand-computed windows."""

from __future__ import annotations

import random
import statistics
from datetime import date, timedelta

from hypothesis import given, settings
from hypothesis import strategies as st

from medallion.sentinel import (
    CheckVerdict,
    GateVerdict,
    InsufficientHistory,
    moving_average,
    population_stddev,
    volume_check_post,
    volume_gate_pre,
)

AS_OF = date(2024, 3, 1)


def history_of(counts: list[int], as_of: date = AS_OF) -> list[tuple[date, int]]:
    """Counts for the N days immediately before as_of, oldest first."""
    n = len(counts)
    return [(as_of - timedelta(days=n - i), counts[i]) for i in range(n)]


class TestMovingAverage:
    def test_constant_window(self):
        hist = history_of([100] * 30)
        assert moving_average(hist, AS_OF) == 100.0

    def test_ramp_window(self):
        hist = history_of(list(range(1, 31)))
        assert moving_average(hist, AS_OF) == 15.5

    def test_insufficient_history(self):
        hist = history_of([50, 60, 70])
        got = moving_average(hist, AS_OF)
        assert isinstance(got, InsufficientHistory)
        assert got.available == 3
        assert got.required == 7

    def test_exactly_min_history_is_enough(self):
        hist = history_of([10] * 7)
        assert moving_average(hist, AS_OF) == 10.0

    def test_window_excludes_as_of_and_later(self):
        hist = history_of([100] * 10) + [(AS_OF, 999), (AS_OF + timedelta(days=1), 999)]
        assert moving_average(hist, AS_OF) == 100.0

    def test_window_keeps_only_most_recent_30(self):
        # 40 days of history: 10 old days of 1000 fall off, 30 recent days of 100 stay.
        hist = history_of([1000] * 10 + [100] * 30)
        assert moving_average(hist, AS_OF) == 100.0


class TestPreGate:
    def test_deep_drop_trips(self):
        hist = history_of([100] * 30)
        res = volume_gate_pre(8, hist, AS_OF)
        assert res.verdict is GateVerdict.PHANTOM_ZERO_SUSPECTED
        assert not res.passed
        assert res.threshold == 10.0

    def test_boundary_count_passes(self):
        # Strict less-than: exactly 10% of the average is allowed through.
        hist = history_of([100] * 30)
        res = volume_gate_pre(10, hist, AS_OF)
        assert res.verdict is GateVerdict.PASS

    def test_zero_fetched_trips(self):
        hist = history_of([100] * 30)
        assert not volume_gate_pre(0, hist, AS_OF).passed

    def test_passes_open_without_history(self):
        res = volume_gate_pre(0, history_of([5, 5, 5]), AS_OF)
        assert res.verdict is GateVerdict.PASS
        assert res.moving_average is None
        assert "insufficient history" in res.reason

    @given(
        counts=st.lists(st.integers(min_value=0, max_value=10_000), min_size=7, max_size=30),
        fetched=st.integers(min_value=0, max_value=10_000),
    )
    @settings(max_examples=100)
    def test_verdict_matches_inequality(self, counts, fetched):
        hist = history_of(counts)
        ma = sum(counts) / len(counts)
        res = volume_gate_pre(fetched, hist, AS_OF)
        assert res.passed == (fetched >= 0.10 * ma)

    def test_monotone_in_fetched_count(self):
        # Once a count passes the gate, every larger count passes too.
        hist = history_of([37, 12, 90, 3, 55, 61, 44, 20, 70, 15])
        verdicts = [volume_gate_pre(n, hist, AS_OF).passed for n in range(0, 30)]
        first_pass = verdicts.index(True)
        assert all(verdicts[first_pass:])
        assert not any(verdicts[:first_pass])


class TestPostCheck:
    def test_spread_window_limits(self):
        # 15x90 + 15x110: mean 100, population sigma 10, band [80, 120].
        hist = history_of([90, 110] * 15)
        assert volume_check_post(121, hist, AS_OF).verdict is CheckVerdict.VOLUME_ANOMALY
        assert volume_check_post(115, hist, AS_OF).verdict is CheckVerdict.PASS
        assert volume_check_post(80, hist, AS_OF).verdict is CheckVerdict.PASS
        assert volume_check_post(79, hist, AS_OF).verdict is CheckVerdict.VOLUME_ANOMALY

    def test_zero_sigma_window(self):
        hist = history_of([100] * 30)
        assert volume_check_post(100, hist, AS_OF).passed
        assert not volume_check_post(101, hist, AS_OF).passed
        assert not volume_check_post(99, hist, AS_OF).passed

    def test_passes_open_without_history(self):
        res = volume_check_post(0, history_of([1, 2]), AS_OF)
        assert res.passed
        assert res.sigma is None

    def test_population_sigma_not_sample(self):
        hist = history_of([90, 110] * 15)
        res = volume_check_post(100, hist, AS_OF)
        assert res.sigma == 10.0  # sample stddev would be ~10.17

    @given(
        counts=st.lists(st.integers(min_value=0, max_value=10_000), min_size=7, max_size=30),
        processed=st.integers(min_value=0, max_value=10_000),
    )
    @settings(max_examples=100)
    def test_verdict_matches_band(self, counts, processed):
        hist = history_of(counts)
        ma = sum(counts) / len(counts)
        sigma = statistics.pstdev(counts)
        res = volume_check_post(processed, hist, AS_OF)
        if sigma == 0:
            assert res.passed == (processed == ma)
        else:
            assert res.passed == (abs(processed - ma) <= 2.0 * sigma)


class TestAgainstIndependentOracle:
    def test_fifty_random_windows(self):
        # statistics.mean/pstdev as the reference implementation.
        rng = random.Random("sentinel-oracle")
        for _ in range(50):
            n = rng.randint(7, 30)
            counts = [rng.randint(0, 5000) for _ in range(n)]
            hist = history_of(counts)
            ma = moving_average(hist, AS_OF)
            assert abs(ma - statistics.mean(counts)) <= 1e-9
            assert abs(population_stddev(counts) - statistics.pstdev(counts)) <= 1e-9
