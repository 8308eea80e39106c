"""Simulated connectors: determinism, pagination, fault injection, credentials."""

from __future__ import annotations

import json
import threading
from datetime import date, timedelta

import pytest

from medallion.clock import SimClock
from medallion.errors import CredentialExpiredError, RateLimitedError, SourceTimeoutError
from medallion.sources import (
    CredentialProvider,
    FaultMode,
    FaultProfile,
    SourceConfig,
    SourceHub,
    commit_shas,
    default_source_configs,
    generate_day,
    identity_entries,
    team_members,
)
from medallion.store.types import SilverEvent, SourceSystem
from medallion.transforms import (
    Drop,
    FilterRules,
    IdentityMap,
    default_silver_schema,
    to_silver,
)

from conftest import T0, D0

CONFIGS = default_source_configs(seed=42)
GITHUB = CONFIGS[SourceSystem.GITHUB]
JENKINS = CONFIGS[SourceSystem.JENKINS]
JIRA = CONFIGS[SourceSystem.JIRA]


def make_hub(clock=None, faults=None, configs=CONFIGS) -> SourceHub:
    return SourceHub(configs, clock or SimClock(T0), faults=faults)


def fetch_whole_day(hub: SourceHub, source: SourceSystem, day: date) -> list[dict]:
    credential = hub.credential(source)
    records, page = [], 0
    while True:
        fp = hub.fetch_page(source, day, page, credential)
        records.extend(fp.records)
        if not fp.has_next:
            return records
        page += 1


class TestDeterminism:
    def test_identical_configs_identical_bytes(self):
        for source in SourceSystem:
            a = fetch_whole_day(make_hub(), source, D0)
            b = fetch_whole_day(make_hub(), source, D0)
            assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)

    def test_different_seed_differs(self):
        other = default_source_configs(seed=43)
        a = fetch_whole_day(make_hub(), SourceSystem.GITHUB, D0)
        b = fetch_whole_day(make_hub(configs=other), SourceSystem.GITHUB, D0)
        assert json.dumps(a) != json.dumps(b)

    def test_pages_slice_the_same_stream(self):
        hub = make_hub()
        whole = fetch_whole_day(hub, SourceSystem.GITHUB, D0)
        again = generate_day(GITHUB, D0)
        assert whole == again


NARROW_GITHUB = SourceConfig(
    source_system=SourceSystem.GITHUB, seed=42, teams=("team-a",),
    repos_per_team=3, daily_event_rates={"commit": 20.0}, page_size=10,
)
NARROW = {SourceSystem.GITHUB: NARROW_GITHUB}


def find_day_with_count(config: SourceConfig, want: int) -> date:
    day = D0
    for _ in range(400):
        if len(generate_day(config, day, github=NARROW_GITHUB)) == want:
            return day
        day += timedelta(days=1)
    pytest.fail(f"no day with exactly {want} events in 400 days")


class TestPagination:
    def test_twenty_three_events_paginate_10_10_3(self):
        day = find_day_with_count(NARROW_GITHUB, 23)
        hub = make_hub(configs=NARROW)
        credential = hub.credential(SourceSystem.GITHUB)
        pages = [hub.fetch_page(SourceSystem.GITHUB, day, i, credential) for i in range(3)]
        assert [len(p.records) for p in pages] == [10, 10, 3]
        assert [p.has_next for p in pages] == [True, True, False]

    def test_read_past_the_end(self):
        hub = make_hub()
        credential = hub.credential(SourceSystem.GITHUB)
        fp = hub.fetch_page(SourceSystem.GITHUB, D0, 99, credential)
        assert fp.records == () and fp.has_next is False

    def test_page_size_one(self):
        cfgs = default_source_configs(seed=42, page_size=1)
        hub = make_hub(configs=cfgs)
        n = len(generate_day(cfgs[SourceSystem.JIRA], D0))
        assert n >= 1
        records = fetch_whole_day(hub, SourceSystem.JIRA, D0)
        assert len(records) == n


class TestSilentTruncation:
    def test_truncation_at_page_zero_looks_like_a_quiet_day(self):
        fault = {SourceSystem.JIRA: FaultProfile(mode=FaultMode.SILENT_TRUNCATION, truncate_after_page=0)}
        hub = make_hub(faults=fault)
        assert len(generate_day(JIRA, D0)) > 0
        fp = hub.fetch_page(SourceSystem.JIRA, D0, 0, hub.credential(SourceSystem.JIRA))
        # no exception, success shape, nothing in it
        assert fp.records == ()
        assert fp.has_next is False

    def test_truncation_after_first_page(self):
        day = find_day_with_count(NARROW_GITHUB, 23)
        fault = {SourceSystem.GITHUB: FaultProfile(mode=FaultMode.SILENT_TRUNCATION, truncate_after_page=1)}
        hub = make_hub(faults=fault, configs=NARROW)
        records = fetch_whole_day(hub, SourceSystem.GITHUB, day)
        assert len(records) == 10  # one full page, then silence

    def test_other_sources_unaffected(self):
        fault = {SourceSystem.JIRA: FaultProfile(mode=FaultMode.SILENT_TRUNCATION)}
        hub = make_hub(faults=fault)
        assert fetch_whole_day(hub, SourceSystem.GITHUB, D0) == generate_day(GITHUB, D0)


class TestRetryableFaults:
    def test_timeout_never_recovers_by_default(self):
        fault = {SourceSystem.GITHUB: FaultProfile(mode=FaultMode.TIMEOUT)}
        hub = make_hub(faults=fault)
        credential = hub.credential(SourceSystem.GITHUB)
        for _ in range(5):
            with pytest.raises(SourceTimeoutError):
                hub.fetch_page(SourceSystem.GITHUB, D0, 0, credential)

    def test_rate_limit_two_failures_then_success(self):
        fault = {SourceSystem.GITHUB: FaultProfile(mode=FaultMode.RATE_LIMIT, failures_before_success=2)}
        hub = make_hub(faults=fault)
        credential = hub.credential(SourceSystem.GITHUB)
        with pytest.raises(RateLimitedError):
            hub.fetch_page(SourceSystem.GITHUB, D0, 0, credential)
        with pytest.raises(RateLimitedError):
            hub.fetch_page(SourceSystem.GITHUB, D0, 0, credential)
        fp = hub.fetch_page(SourceSystem.GITHUB, D0, 0, credential)
        assert fp.records == tuple(generate_day(GITHUB, D0)[:10])

    def test_failure_budget_is_per_date(self):
        fault = {SourceSystem.GITHUB: FaultProfile(mode=FaultMode.RATE_LIMIT, failures_before_success=1)}
        hub = make_hub(faults=fault)
        credential = hub.credential(SourceSystem.GITHUB)
        with pytest.raises(RateLimitedError):
            hub.fetch_page(SourceSystem.GITHUB, D0, 0, credential)
        hub.fetch_page(SourceSystem.GITHUB, D0, 0, credential)
        with pytest.raises(RateLimitedError):
            hub.fetch_page(SourceSystem.GITHUB, D0 + timedelta(days=1), 0, credential)


class TestSchemaRename:
    def test_jira_created_field_renamed(self):
        fault = {SourceSystem.JIRA: FaultProfile(
            mode=FaultMode.SCHEMA_RENAME, renamed_field=("created", "created_datetime"))}
        hub = make_hub(faults=fault)
        records = fetch_whole_day(hub, SourceSystem.JIRA, D0)
        assert records, "expected at least one incident on the probe day"
        assert all("created" not in r and "created_datetime" in r for r in records)

    def test_rename_requires_field_pair(self):
        with pytest.raises(ValueError):
            FaultProfile(mode=FaultMode.SCHEMA_RENAME)


class TestCredentials:
    def test_ttl_from_now(self):
        clock = SimClock(T0)
        provider = CredentialProvider(clock, ttl=timedelta(minutes=60))
        credential = provider.get_credential()
        assert credential.expires_at == T0 + timedelta(minutes=60)
        assert credential.valid_at(clock.now())

    def test_tokens_rotate(self):
        provider = CredentialProvider(SimClock(T0))
        a, b = provider.get_credential(), provider.get_credential()
        assert a.token != b.token
        assert a.valid_at(T0) and b.valid_at(T0)

    def test_stale_token_rejected_fresh_accepted(self):
        clock = SimClock(T0)
        hub = make_hub(clock=clock)
        stale = hub.provider.get_credential()
        clock.advance(minutes=61)
        with pytest.raises(CredentialExpiredError):
            hub.fetch_page(SourceSystem.GITHUB, D0, 0, stale)
        fresh = hub.provider.get_credential()
        hub.fetch_page(SourceSystem.GITHUB, D0, 0, fresh)

    def test_expired_credentials_fault_pins_first_attempt_to_stale_token(self):
        clock = SimClock(T0)
        fault = {SourceSystem.JIRA: FaultProfile(mode=FaultMode.EXPIRED_CREDENTIALS)}
        hub = make_hub(clock=clock, faults=fault)
        clock.advance(minutes=61)
        first = hub.credential(SourceSystem.JIRA, attempt=1)
        with pytest.raises(CredentialExpiredError):
            hub.fetch_page(SourceSystem.JIRA, D0, 0, first)
        second = hub.credential(SourceSystem.JIRA, attempt=2)
        hub.fetch_page(SourceSystem.JIRA, D0, 0, second)


class TestFetchCounter:
    def test_counts_every_call_even_failures(self):
        fault = {SourceSystem.GITHUB: FaultProfile(mode=FaultMode.TIMEOUT)}
        hub = make_hub(faults=fault)
        credential = hub.credential(SourceSystem.JIRA)
        hub.fetch_page(SourceSystem.JIRA, D0, 0, credential)
        with pytest.raises(SourceTimeoutError):
            hub.fetch_page(SourceSystem.GITHUB, D0, 0, credential)
        assert hub.fetch_calls == 2

    def test_counter_is_atomic_under_threads(self):
        hub = make_hub()
        credential = hub.credential(SourceSystem.GITHUB)

        def hammer():
            for _ in range(50):
                hub.fetch_page(SourceSystem.GITHUB, D0, 0, credential)

        threads = [threading.Thread(target=hammer) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert hub.fetch_calls == 400


class TestGeneratedPayloads:
    def test_heterogeneous_timestamp_encodings(self):
        github_items = generate_day(GITHUB, D0)
        jenkins_items = generate_day(JENKINS, D0, github=GITHUB)
        jira_items = generate_day(JIRA, D0)
        assert github_items and jenkins_items and jira_items
        assert all(isinstance(i["committed_at"], str) for i in github_items)
        # at least some commits carry a non-UTC offset
        assert any(not i["committed_at"].endswith("+00:00") for i in github_items)
        assert all(isinstance(i["timestamp"], int) for i in jenkins_items)
        assert all(i["created"].endswith("+00:00") for i in jira_items)

    def test_deploys_link_to_previous_day_commits(self):
        yesterday_shas = {
            team: set(commit_shas(GITHUB, D0 - timedelta(days=1), team))
            for team in JENKINS.teams
        }
        deploys = [i for i in generate_day(JENKINS, D0, github=GITHUB) if i["job_type"] == "deploy"]
        assert deploys
        for item in deploys:
            assert item["git_commit"] in yesterday_shas[item["team"]]

    def test_every_item_normalizes_cleanly(self):
        schema = default_silver_schema()
        identity = IdentityMap(identity_entries(GITHUB.teams))
        filters = FilterRules()
        for source, config in CONFIGS.items():
            for day_offset in range(3):
                day = D0 + timedelta(days=day_offset)
                for item in generate_day(config, day, github=GITHUB):
                    got = to_silver(item, source, schema, identity, filters)
                    assert isinstance(got, (SilverEvent, Drop))

    def test_native_ids_unique_within_a_day(self):
        for source, config in CONFIGS.items():
            items = generate_day(config, D0, github=GITHUB)
            if source is SourceSystem.JIRA:
                ids = [(i["key"], i["transition"]) for i in items]
            elif source is SourceSystem.GITHUB:
                ids = [i["sha"] for i in items]
            else:
                ids = [i["build_id"] for i in items]
            assert len(ids) == len(set(ids))

    def test_identity_entries_cover_rosters(self):
        entries = identity_entries(("team-a", "team-b"))
        for handle in team_members("team-a"):
            assert handle in entries
        assert "dev0@team-a.example.com" in entries
        assert entries["dev0.team-a"] == entries["dev0@team-a.example.com"]
