import sys
from datetime import date, timedelta

import pytest

from medallion.clock import SimClock, utc
from medallion.store import (
    EventKey,
    EventType,
    GoldMetric,
    MedallionStore,
    MetricType,
    SilverEvent,
    SourceSystem,
)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One line per acceptance criterion, after the normal summary, so the
    gate outcome survives pytest's output capture."""
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.ensure_newline()
    terminalreporter.section("acceptance gate")
    for name, passed in results:
        terminalreporter.write_line(f"ACCEPTANCE  {name}: {'PASS' if passed else 'FAIL'}")

T0 = utc(2024, 3, 1, 6, 0, 0)
D0 = date(2024, 3, 1)


@pytest.fixture
def clock():
    return SimClock(T0)


@pytest.fixture
def store(tmp_path, clock):
    s = MedallionStore(tmp_path / "data", clock)
    yield s
    s.close()


def make_silver(
    native_id: str,
    *,
    source=SourceSystem.GITHUB,
    event_type=EventType.COMMIT,
    occurred_at=None,
    contributor="c1",
    team="team-a",
    repository="repo-1",
    attributes=None,
) -> SilverEvent:
    return SilverEvent(
        event_key=EventKey(source, native_id),
        event_type=event_type,
        occurred_at=occurred_at or T0,
        contributor_id=contributor,
        team_id=team,
        repository=repository,
        attributes=attributes or {},
    )


def make_gold(
    day=D0,
    team="team-a",
    metric=MetricType.DEPLOYMENT_FREQUENCY,
    value=4.0,
    computed_at=None,
    execution_id="run-1",
) -> GoldMetric:
    return GoldMetric(
        date=day,
        team_id=team,
        metric_type=metric,
        value=value,
        computed_at=computed_at or T0,
        execution_id=execution_id,
    )


def days_ago(n: int):
    return T0 - timedelta(days=n)
