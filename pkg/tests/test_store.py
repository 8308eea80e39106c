import json
import threading
from datetime import date, timedelta

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from medallion.clock import SimClock, utc
from medallion.errors import CrashInjected, ResumeTokenError, ValidationError
from medallion.store import (
    ChangeOp,
    EventKey,
    EventType,
    GoldMetric,
    MedallionStore,
    MetricType,
    SilverEvent,
    SourceSystem,
    UpsertOutcome,
)

from conftest import D0, T0, days_ago, make_gold, make_silver


class TestBronze:
    def test_append_then_read_identity(self, store, clock):
        payload = {"build_id": "42", "result": "SUCCESS"}
        bronze_id = store.append_bronze(
            payload, fetched_at=clock.now(), source_system=SourceSystem.JENKINS, execution_id="E1"
        )
        records = store.query_bronze()
        assert len(records) == 1
        assert records[0].bronze_id == bronze_id
        assert records[0].payload == payload
        assert records[0].execution_id == "E1"

    def test_duplicate_payload_not_deduped(self, store, clock):
        payload = {"build_id": "42"}
        id1 = store.append_bronze(payload, fetched_at=clock.now(), source_system=SourceSystem.JENKINS, execution_id="E1")
        id2 = store.append_bronze(payload, fetched_at=clock.now(), source_system=SourceSystem.JENKINS, execution_id="E1")
        assert id1 != id2
        assert store.bronze_count() == 2

    def test_empty_payload_rejected(self, store, clock):
        with pytest.raises(ValidationError):
            store.append_bronze({}, fetched_at=clock.now(), source_system=SourceSystem.JIRA, execution_id="E1")

    def test_payload_stored_byte_identical(self, store, clock):
        payload = {"weird": ["ordering", {"z": 1, "a": None}], "created_datetime": "x"}
        store.append_bronze(payload, fetched_at=clock.now(), source_system=SourceSystem.JIRA, execution_id="E1")
        assert store.query_bronze()[0].payload == payload

    def test_compaction_age_boundaries(self, store, clock):
        for age in (5, 29, 31):
            store.append_bronze(
                {"age": age}, fetched_at=days_ago(age), source_system=SourceSystem.JIRA, execution_id="E1"
            )
        purged = store.compact_bronze(now=clock.now(), retention_days=30)
        assert purged == 1
        assert store.bronze_count() == 2

    def test_compaction_empty_store(self, store, clock):
        assert store.compact_bronze(now=clock.now()) == 0

    def test_record_exactly_at_boundary_kept(self, store, clock):
        store.append_bronze({"age": 30}, fetched_at=days_ago(30), source_system=SourceSystem.JIRA, execution_id="E1")
        assert store.compact_bronze(now=clock.now(), retention_days=30) == 0
        assert store.bronze_count() == 1

    def test_retention_must_be_positive(self, store, clock):
        with pytest.raises(ValidationError):
            store.compact_bronze(now=clock.now(), retention_days=0)


class TestSilver:
    def test_upsert_insert_then_replace(self, store):
        e1 = make_silver("sha1", attributes={"message": "first"})
        assert store.upsert_silver(e1) is UpsertOutcome.INSERTED
        e2 = make_silver("sha1", attributes={"message": "changed"})
        assert store.upsert_silver(e2) is UpsertOutcome.REPLACED
        assert store.silver_count() == 1
        stored = store.get_silver(EventKey(SourceSystem.GITHUB, "sha1"))
        assert stored.attributes["message"] == "changed"

    def test_distinct_keys_accumulate(self, store):
        store.upsert_silver(make_silver("sha1"))
        store.upsert_silver(make_silver("sha2"))
        assert store.silver_count() == 2

    def test_rerun_of_full_day_is_idempotent(self, store):
        events = [make_silver(f"sha{i}") for i in range(20)]
        for e in events:
            store.upsert_silver(e)
        count_before = store.silver_count()
        for e in events:
            store.upsert_silver(e)
        assert store.silver_count() == count_before


class TestGold:
    def test_replace_same_key_two_change_events(self, store):
        outcome1, ev1 = store.upsert_gold(make_gold(value=4.0))
        outcome2, ev2 = store.upsert_gold(make_gold(value=5.0))
        assert (outcome1, outcome2) == (UpsertOutcome.INSERTED, UpsertOutcome.REPLACED)
        assert (ev1.op, ev2.op) == (ChangeOp.INSERT, ChangeOp.REPLACE)
        assert ev2.token == ev1.token + 1
        assert store.gold_count() == 1
        metrics = store.query_gold(D0, D0)
        assert len(metrics) == 1 and metrics[0].value == 5.0

    def test_first_token_is_one(self, store):
        _, event = store.upsert_gold(make_gold())
        assert event.token == 1

    def test_cfr_out_of_range_rejected(self, store):
        with pytest.raises(ValidationError):
            make_gold(metric=MetricType.CHANGE_FAILURE_RATE, value=1.2)
        assert store.gold_count() == 0

    def test_query_respects_key_uniqueness(self, store):
        for i in range(3):  # three re-runs of the same 7 days
            for d in range(7):
                store.upsert_gold(make_gold(day=D0 + timedelta(days=d), value=float(i)))
        result = store.query_gold(D0, D0 + timedelta(days=6), team_id="team-a", metric_type=MetricType.DEPLOYMENT_FREQUENCY)
        assert len(result) <= 7
        assert len(result) == 7

    def test_query_ordering(self, store):
        store.upsert_gold(make_gold(day=D0 + timedelta(days=1), team="team-b"))
        store.upsert_gold(make_gold(day=D0, team="team-b", metric=MetricType.MTTR, value=12.0))
        store.upsert_gold(make_gold(day=D0, team="team-a", metric=MetricType.CHANGE_FAILURE_RATE, value=0.1))
        store.upsert_gold(make_gold(day=D0, team="team-b", metric=MetricType.CHANGE_FAILURE_RATE, value=0.1))
        result = store.query_gold(D0, D0 + timedelta(days=5))
        keys = [(m.date, m.team_id, m.metric_type.value) for m in result]
        assert keys == sorted(keys)

    def test_inverted_range_rejected(self, store):
        with pytest.raises(ValidationError):
            store.query_gold(D0, D0 - timedelta(days=1))

    def test_empty_store_empty_list(self, store):
        assert store.query_gold(D0, D0 + timedelta(days=30)) == []

    def test_dashboard_scans_gold_not_silver(self, store):
        # 10,000 silver events must not affect gold result size:
        # 3 teams x 4 metrics x 30 days -> at most 360 documents scanned.
        for i in range(10_000):
            store.upsert_silver(make_silver(f"sha{i}", team=f"team-{i % 3}"))
        for d in range(30):
            day = D0 + timedelta(days=d)
            for team in ("team-0", "team-1", "team-2"):
                for metric, value in (
                    (MetricType.DEPLOYMENT_FREQUENCY, 4.0),
                    (MetricType.LEAD_TIME_MEDIAN, 90.0),
                    (MetricType.CHANGE_FAILURE_RATE, 0.1),
                    (MetricType.MTTR, 45.0),
                ):
                    store.upsert_gold(make_gold(day=day, team=team, metric=metric, value=value))
        result = store.query_gold(D0, D0 + timedelta(days=29))
        assert len(result) <= 360
        assert store.gold_count() <= 360


class TestChangeStream:
    def fill(self, store, n=10):
        for i in range(n):
            store.upsert_gold(make_gold(day=D0 + timedelta(days=i)))

    def test_replay_after_token(self, store):
        self.fill(store)
        tokens = [e.token for e in store.read_changes(after_token=4)]
        assert tokens == [5, 6, 7, 8, 9, 10]

    def test_after_latest_yields_nothing_until_next_write(self, store):
        self.fill(store)
        assert store.read_changes(after_token=10) == []
        _, event = store.upsert_gold(make_gold(day=D0 + timedelta(days=50)))
        assert [e.token for e in store.read_changes(after_token=10)] == [event.token]

    def test_full_replay_from_zero(self, store):
        self.fill(store)
        assert [e.token for e in store.read_changes(after_token=0)] == list(range(1, 11))

    def test_garbage_token_rejected(self, store):
        self.fill(store, 3)
        with pytest.raises(ResumeTokenError):
            store.read_changes(after_token=99)
        with pytest.raises(ResumeTokenError):
            store.read_changes(after_token=-1)

    def test_live_subscription_sees_new_commits(self, store):
        self.fill(store, 2)
        seen = []
        stop = threading.Event()

        def consume():
            for event in store.subscribe_changes(after_token=0, stop_event=stop):
                seen.append(event.token)
                if len(seen) == 3:
                    stop.set()

        t = threading.Thread(target=consume)
        t.start()
        store.upsert_gold(make_gold(day=D0 + timedelta(days=30)))
        t.join(timeout=5)
        assert not t.is_alive()
        assert seen == [1, 2, 3]

    def test_change_log_completeness(self, store):
        self.fill(store, 7)
        assert store.max_token() == 7
        tokens = [e.token for e in store.read_changes(0)]
        assert tokens == list(range(1, 8))


class TestBucketStats:
    def test_partition_cardinality_fixture(self, store):
        # 10 teams x 20 repos x 5 events = 1000 events;
        # by repository: 200 buckets of 5; by team: 10 buckets of 100.
        n = 0
        for t in range(10):
            for r in range(20):
                for i in range(5):
                    store.upsert_silver(
                        make_silver(f"e{n}", team=f"team-{t}", repository=f"repo-{t}-{r}")
                    )
                    n += 1
        by_repo = store.bucket_stats("repository")
        assert by_repo.bucket_count == 200
        assert by_repo.mean_events_per_bucket == 5
        by_team = store.bucket_stats("team_id")
        assert by_team.bucket_count == 10
        assert by_team.mean_events_per_bucket == 100
        assert by_team.bucket_count < by_repo.bucket_count

    def test_single_team(self, store):
        store.upsert_silver(make_silver("a", team="only"))
        assert store.bucket_stats("team_id").bucket_count == 1

    def test_empty_silver_rejected(self, store):
        with pytest.raises(ValidationError):
            store.bucket_stats("team_id")


class TestPersistence:
    def test_reopen_rebuilds_indexes(self, tmp_path, clock):
        root = tmp_path / "data"
        s1 = MedallionStore(root, clock)
        s1.append_bronze({"a": 1}, fetched_at=clock.now(), source_system=SourceSystem.JIRA, execution_id="E1")
        s1.upsert_silver(make_silver("sha1"))
        s1.upsert_gold(make_gold())
        s1.close()

        s2 = MedallionStore(root, clock)
        assert s2.bronze_count() == 1
        assert s2.silver_count() == 1
        assert s2.gold_count() == 1
        assert s2.max_token() == 1
        s2.close()

    def test_documents_carry_schema_version(self, tmp_path, clock):
        root = tmp_path / "data"
        s = MedallionStore(root, clock)
        s.upsert_gold(make_gold())
        s.close()
        for seg in (root / "gold").glob("*.seg"):
            for line in seg.read_text().splitlines():
                assert json.loads(line)["schema_version"] == 1
        for line in (root / "changelog.seg").read_text().splitlines():
            assert json.loads(line)["schema_version"] == 1

    def test_gold_compaction_is_canonical(self, tmp_path):
        def run(order):
            clock = SimClock(T0)
            s = MedallionStore(tmp_path / f"d{order[0]}", clock)
            for day_offset, team in order:
                s.upsert_gold(make_gold(day=D0 + timedelta(days=day_offset), team=team))
            s.compact_gold()
            data = s.gold_segment_bytes()
            s.close()
            return data

        a = run([(0, "team-a"), (1, "team-b"), (0, "team-b")])
        b = run([(1, "team-b"), (0, "team-b"), (0, "team-a")])
        assert a == b

    def test_silver_compaction_drops_superseded_versions(self, tmp_path, clock):
        root = tmp_path / "data"
        s = MedallionStore(root, clock)
        s.upsert_silver(make_silver("sha1", attributes={"v": 1}))
        s.upsert_silver(make_silver("sha1", attributes={"v": 2}))
        s.compact_silver()
        s.close()
        lines = [l for seg in (root / "silver").glob("*.seg") for l in seg.read_text().splitlines()]
        assert len(lines) == 1
        assert json.loads(lines[0])["attributes"] == {"v": 2}

    def test_torn_tail_dropped_on_load(self, tmp_path, clock):
        root = tmp_path / "data"
        s = MedallionStore(root, clock)
        s.upsert_silver(make_silver("sha1"))
        s.close()
        seg = next((root / "silver").glob("*.seg"))
        with open(seg, "a") as f:
            f.write('{"schema_version":1,"source_system":"github","source_na')
        s2 = MedallionStore(root, clock)
        assert s2.silver_count() == 1
        s2.close()


class TestAtomicity:
    def test_crash_between_gold_and_changelog_rolls_forward(self, tmp_path, clock):
        root = tmp_path / "data"
        s = MedallionStore(root, clock)
        s.upsert_gold(make_gold(value=1.0))
        s._crash_points.add("after_gold_append")
        with pytest.raises(CrashInjected):
            s.upsert_gold(make_gold(value=2.0))
        s.close()

        recovered = MedallionStore(root, clock)
        # the gold write survived and its change event was reconstructed
        assert recovered.gold_count() == 1
        assert recovered.query_gold(D0, D0)[0].value == 2.0
        events = recovered.read_changes(0)
        assert [e.token for e in events] == [1, 2]
        assert events[1].op is ChangeOp.REPLACE
        assert events[1].document["value"] == 2.0
        recovered.close()

    def test_crash_on_insert_recovers_insert_op(self, tmp_path, clock):
        root = tmp_path / "data"
        s = MedallionStore(root, clock)
        s._crash_points.add("after_gold_append")
        with pytest.raises(CrashInjected):
            s.upsert_gold(make_gold(value=3.0))
        s.close()
        recovered = MedallionStore(root, clock)
        events = recovered.read_changes(0)
        assert len(events) == 1 and events[0].op is ChangeOp.INSERT
        recovered.close()


class TestProperties:
    @given(
        st.lists(
            st.tuples(st.integers(min_value=0, max_value=5), st.sampled_from(["team-a", "team-b"]), st.floats(0, 100)),
            min_size=1,
            max_size=30,
        )
    )
    @settings(max_examples=30, deadline=None)
    def test_gold_cardinality_bound_and_completeness(self, tmp_path_factory, writes):
        clock = SimClock(T0)
        s = MedallionStore(tmp_path_factory.mktemp("prop"), clock)
        for day_offset, team, value in writes:
            s.upsert_gold(make_gold(day=D0 + timedelta(days=day_offset), team=team, value=value))
        dates = {w[0] for w in writes}
        teams = {w[1] for w in writes}
        assert s.gold_count() <= len(dates) * len(teams) * 4
        assert s.max_token() == len(writes)
        assert [e.token for e in s.read_changes(0)] == list(range(1, len(writes) + 1))
        s.close()

    @given(st.integers(min_value=0, max_value=10))
    @settings(max_examples=10, deadline=None)
    def test_upsert_twice_same_state_as_once(self, tmp_path_factory, day_offset):
        clock = SimClock(T0)
        root = tmp_path_factory.mktemp("idem")
        s = MedallionStore(root, clock)
        metric = make_gold(day=D0 + timedelta(days=day_offset))
        s.upsert_gold(metric)
        s.compact_gold()
        once = s.gold_segment_bytes()
        s.upsert_gold(metric)
        s.compact_gold()
        twice = s.gold_segment_bytes()
        assert once == twice
        s.close()
