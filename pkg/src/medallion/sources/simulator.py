"""Deterministic stand-ins for Jira, GitHub, and Jenkins.

Every payload a connector returns is a pure function of (seed, source,
logical date), so scenario assertions are exact rather than statistical. The
three sources deliberately disagree on timestamp encoding: GitHub emits ISO
8601 with whatever offset the committer's machine had, Jira emits ISO 8601
UTC, Jenkins emits Unix epoch seconds.

The SourceHub layers fault injection, credential checking, and an atomic
fetch-call counter over the pure generators.
"""

from __future__ import annotations

import hashlib
import random
import threading
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta, timezone
from typing import Any, Iterable, Mapping

from ..clock import Clock
from ..errors import CredentialExpiredError, RateLimitedError, SourceTimeoutError, ValidationError
from ..store.types import SourceSystem
from .credentials import Credential, CredentialProvider
from .faults import FaultMode, FaultProfile, NO_FAULT

TEAM_SIZE = 4

# Committer machines are scattered across offices; offsets rotate per commit.
_GITHUB_OFFSETS = (
    timezone(timedelta(hours=-8)),
    timezone(timedelta(hours=-5)),
    timezone.utc,
    timezone(timedelta(hours=2)),
    timezone(timedelta(hours=5, minutes=30)),
)

_SEVERITIES = ("P1", "P2", "P3", "P4")
_SEVERITY_WEIGHTS = (1, 3, 4, 2)


@dataclass(frozen=True)
class SourceConfig:
    source_system: SourceSystem
    seed: int
    teams: tuple[str, ...]
    repos_per_team: int
    daily_event_rates: Mapping[str, float]
    page_size: int = 10

    def __post_init__(self):
        if self.page_size < 1:
            raise ValidationError("page_size must be >= 1")
        if not self.teams:
            raise ValidationError("at least one team required")
        for name, rate in self.daily_event_rates.items():
            if rate < 0:
                raise ValidationError(f"rate for {name!r} must be >= 0")

    def to_doc(self) -> dict:
        return {
            "source_system": self.source_system.value,
            "seed": self.seed,
            "teams": list(self.teams),
            "repos_per_team": self.repos_per_team,
            "daily_event_rates": dict(self.daily_event_rates),
            "page_size": self.page_size,
        }

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "SourceConfig":
        return cls(
            source_system=SourceSystem(doc["source_system"]),
            seed=int(doc["seed"]),
            teams=tuple(doc["teams"]),
            repos_per_team=int(doc.get("repos_per_team", 3)),
            daily_event_rates=dict(doc["daily_event_rates"]),
            page_size=int(doc.get("page_size", 10)),
        )


@dataclass(frozen=True)
class FetchPage:
    records: tuple[dict, ...]
    has_next: bool
    page_index: int


def default_source_configs(
    seed: int = 42,
    teams: tuple[str, ...] = ("team-a", "team-b", "team-c"),
    repos_per_team: int = 3,
    page_size: int = 10,
) -> dict[SourceSystem, SourceConfig]:
    def cfg(source: SourceSystem, rates: dict[str, float]) -> SourceConfig:
        return SourceConfig(
            source_system=source, seed=seed, teams=teams,
            repos_per_team=repos_per_team, daily_event_rates=rates, page_size=page_size,
        )

    return {
        SourceSystem.GITHUB: cfg(SourceSystem.GITHUB, {"commit": 18.0}),
        SourceSystem.JENKINS: cfg(SourceSystem.JENKINS, {"build": 8.0, "deployment": 4.0}),
        SourceSystem.JIRA: cfg(SourceSystem.JIRA, {"incident": 2.0}),
    }


def team_members(team: str) -> list[str]:
    return [f"dev{j}.{team}" for j in range(TEAM_SIZE)]


def member_email(handle: str) -> str:
    user, team = handle.split(".", 1)
    return f"{user}@{team}.example.com"


def identity_entries(teams: Iterable[str]) -> dict[str, str]:
    """Alias -> contributor id pairs covering every simulated person, both
    their VCS handle and their ticketing email."""
    entries = {}
    for team in teams:
        for handle in team_members(team):
            contributor = f"{team}/{handle.split('.', 1)[0]}"
            entries[handle] = contributor
            entries[member_email(handle)] = contributor
    return entries


def _draw_count(rng: random.Random, mean: float) -> int:
    if mean <= 0:
        return 0
    low = round(0.8 * mean)
    high = max(low, round(1.2 * mean))
    return rng.randint(low, high)


def _count_rng(config: SourceConfig, logical_date: date, team: str, stream: str) -> random.Random:
    return random.Random(
        f"{config.seed}:{config.source_system.value}:{logical_date.isoformat()}:{team}:{stream}"
    )


def _instant(logical_date: date, minute: int) -> datetime:
    return datetime.combine(logical_date, time(tzinfo=timezone.utc)) + timedelta(minutes=minute)


def commit_count(github: SourceConfig, logical_date: date, team: str) -> int:
    rng = _count_rng(github, logical_date, team, "count")
    return _draw_count(rng, github.daily_event_rates.get("commit", 0.0))


def commit_shas(github: SourceConfig, logical_date: date, team: str) -> list[str]:
    n = commit_count(github, logical_date, team)
    return [
        hashlib.sha1(f"{github.seed}:{team}:{logical_date.isoformat()}:c{i}".encode()).hexdigest()[:12]
        for i in range(n)
    ]


def generate_github_day(config: SourceConfig, logical_date: date) -> list[dict]:
    items = []
    for team in config.teams:
        shas = commit_shas(config, logical_date, team)
        rng = _count_rng(config, logical_date, team, "body")
        members = team_members(team)
        for sha in shas:
            author = "dependabot[bot]" if rng.random() < 0.07 else rng.choice(members)
            when = _instant(logical_date, rng.randint(0, 1439))
            local = when.astimezone(rng.choice(_GITHUB_OFFSETS))
            items.append({
                "sha": sha,
                "author": author,
                "committed_at": local.isoformat(),
                "team": team,
                "repo": f"{team}-repo-{rng.randrange(config.repos_per_team)}",
                "message": f"change {sha[:6]}",
            })
    return items


def generate_jenkins_day(
    config: SourceConfig, logical_date: date, github: SourceConfig | None
) -> list[dict]:
    items = []
    for team in config.teams:
        rng = _count_rng(config, logical_date, team, "body")
        deploys = _draw_count(
            _count_rng(config, logical_date, team, "deploy-count"),
            config.daily_event_rates.get("deployment", 0.0),
        )
        builds = _draw_count(
            _count_rng(config, logical_date, team, "build-count"),
            config.daily_event_rates.get("build", 0.0),
        )
        members = team_members(team)
        # Deploys ship yesterday's commits, so lead times stay positive.
        linkable = commit_shas(github, logical_date - timedelta(days=1), team) if github else []
        for i in range(deploys):
            repo = f"{team}-repo-{rng.randrange(config.repos_per_team)}"
            result = "SUCCESS" if rng.random() < 0.88 else "FAILURE"
            sha = rng.choice(linkable) if linkable else "unlinked"
            items.append({
                "build_id": f"jk-{team}-{logical_date:%Y%m%d}-d{i}",
                "job_name": f"deploy-{repo}",
                "job_type": "deploy",
                "result": result,
                "timestamp": int(_instant(logical_date, rng.randint(8 * 60, 20 * 60)).timestamp()),
                "git_commit": sha,
                "started_by": rng.choice(members),
                "team": team,
                "repo": repo,
            })
        for i in range(builds):
            repo = f"{team}-repo-{rng.randrange(config.repos_per_team)}"
            roll = rng.random()
            result = "SUCCESS" if roll < 0.75 else ("FAILURE" if roll < 0.92 else "ABORTED")
            items.append({
                "build_id": f"jk-{team}-{logical_date:%Y%m%d}-b{i}",
                "job_name": f"ci-{repo}",
                "job_type": "ci",
                "result": result,
                "timestamp": int(_instant(logical_date, rng.randint(0, 1439)).timestamp()),
                "git_commit": rng.choice(linkable) if linkable else "unlinked",
                "started_by": rng.choice(members),
                "team": team,
                "repo": repo,
            })
    return items


@dataclass(frozen=True)
class _Incident:
    key: str
    team: str
    repo: str
    severity: str
    reporter: str
    opened_at: datetime
    resolved_at: datetime | None


def _team_incidents(config: SourceConfig, logical_date: date, team: str) -> list[_Incident]:
    rng = _count_rng(config, logical_date, team, "incidents")
    count = _draw_count(
        _count_rng(config, logical_date, team, "incident-count"),
        config.daily_event_rates.get("incident", 0.0),
    )
    members = team_members(team)
    incidents = []
    for i in range(count):
        opened = _instant(logical_date, rng.randint(0, 1380))
        resolved = None
        if rng.random() < 0.85:
            # Capped below a day so a resolution lands today or tomorrow.
            resolved = opened + timedelta(minutes=rng.randint(15, 1380))
        incidents.append(_Incident(
            key=f"{team.upper().replace('-', '')}-{logical_date:%Y%m%d}-{i}",
            team=team,
            repo=f"{team}-repo-{rng.randrange(config.repos_per_team)}",
            severity=rng.choices(_SEVERITIES, weights=_SEVERITY_WEIGHTS)[0],
            reporter=member_email(rng.choice(members)),
            opened_at=opened,
            resolved_at=resolved,
        ))
    return incidents


def _jira_item(incident: _Incident, transition: str) -> dict:
    item = {
        "key": incident.key,
        "transition": transition,
        "created": incident.opened_at.isoformat(),
        "reporter": incident.reporter,
        "team": incident.team,
        "repo": incident.repo,
        "severity": incident.severity,
    }
    if transition == "resolved":
        item["resolved"] = incident.resolved_at.isoformat()
    return item


def generate_jira_day(config: SourceConfig, logical_date: date) -> list[dict]:
    """Status-transition feed: opens from today plus any resolution whose
    timestamp falls today (including yesterday's incidents)."""
    items = []
    for team in config.teams:
        for incident in _team_incidents(config, logical_date - timedelta(days=1), team):
            if incident.resolved_at is not None and incident.resolved_at.date() == logical_date:
                items.append(_jira_item(incident, "resolved"))
        for incident in _team_incidents(config, logical_date, team):
            items.append(_jira_item(incident, "opened"))
            if incident.resolved_at is not None and incident.resolved_at.date() == logical_date:
                items.append(_jira_item(incident, "resolved"))
    return items


def generate_day(
    config: SourceConfig,
    logical_date: date,
    github: SourceConfig | None = None,
) -> list[dict]:
    if config.source_system is SourceSystem.GITHUB:
        return generate_github_day(config, logical_date)
    if config.source_system is SourceSystem.JENKINS:
        return generate_jenkins_day(config, logical_date, github)
    return generate_jira_day(config, logical_date)


def fetch_page(
    config: SourceConfig,
    logical_date: date,
    page_index: int,
    credential: Credential,
    clock: Clock,
    github: SourceConfig | None = None,
) -> FetchPage:
    """Fault-free paginated read. Reads past the last page come back empty."""
    if not credential.valid_at(clock.now()):
        raise CredentialExpiredError(f"token {credential.token} expired at {credential.expires_at}")
    items = generate_day(config, logical_date, github)
    start = page_index * config.page_size
    end = start + config.page_size
    return FetchPage(
        records=tuple(items[start:end]),
        has_next=end < len(items),
        page_index=page_index,
    )


class SourceHub:
    """The connector fleet a pipeline talks to: pure generators underneath,
    fault injection and credential policy on top, one atomic counter of every
    fetch made (backfills from Silver must leave it untouched)."""

    def __init__(
        self,
        configs: Mapping[SourceSystem, SourceConfig],
        clock: Clock,
        faults: Mapping[SourceSystem, FaultProfile] | None = None,
        credential_provider: CredentialProvider | None = None,
    ):
        self._configs = dict(configs)
        self._clock = clock
        self._faults = dict(faults or {})
        self.provider = credential_provider or CredentialProvider(clock)
        self._lock = threading.Lock()
        self._fetch_calls = 0
        self._failures: dict[tuple[SourceSystem, date], int] = {}

    @property
    def configs(self) -> dict[SourceSystem, SourceConfig]:
        return dict(self._configs)

    def config_for(self, source: SourceSystem) -> SourceConfig:
        return self._configs[source]

    def fault_for(self, source: SourceSystem) -> FaultProfile:
        return self._faults.get(source, NO_FAULT)

    @property
    def fetch_calls(self) -> int:
        with self._lock:
            return self._fetch_calls

    def credential(self, source: SourceSystem, attempt: int = 1) -> Credential:
        fault = self.fault_for(source)
        if fault.mode is FaultMode.EXPIRED_CREDENTIALS and attempt <= 1:
            # The first attempt clings to a cached token that is already past
            # its expiry; only the retry asks the provider for a fresh one.
            return Credential(token=f"tok-stale-{source.value}", expires_at=self._clock.now())
        return self.provider.get_credential()

    def fetch_page(
        self, source: SourceSystem, logical_date: date, page_index: int, credential: Credential
    ) -> FetchPage:
        with self._lock:
            self._fetch_calls += 1
        if not credential.valid_at(self._clock.now()):
            raise CredentialExpiredError(
                f"token {credential.token} expired at {credential.expires_at}"
            )
        fault = self.fault_for(source)
        if fault.mode in (FaultMode.TIMEOUT, FaultMode.RATE_LIMIT):
            if self._count_failure(source, logical_date, fault.failures_before_success):
                if fault.mode is FaultMode.TIMEOUT:
                    raise SourceTimeoutError(f"{source.value} read timed out")
                raise RateLimitedError(f"{source.value} returned 429")
        config = self._configs[source]
        if fault.mode is FaultMode.SILENT_TRUNCATION and page_index >= fault.truncate_after_page:
            # The failure mode under study: an empty page with a success
            # status, indistinguishable from a genuinely quiet day.
            return FetchPage(records=(), has_next=False, page_index=page_index)
        page = fetch_page(
            config, logical_date, page_index, credential, self._clock,
            github=self._configs.get(SourceSystem.GITHUB),
        )
        if fault.mode is FaultMode.SCHEMA_RENAME and fault.renamed_field:
            old, new = fault.renamed_field
            renamed = []
            for record in page.records:
                record = dict(record)
                if old in record:
                    record[new] = record.pop(old)
                renamed.append(record)
            page = FetchPage(records=tuple(renamed), has_next=page.has_next, page_index=page.page_index)
        return page

    def _count_failure(self, source: SourceSystem, logical_date: date, budget: int) -> bool:
        """True while the fault should still fire. Negative budget never stops."""
        key = (source, logical_date)
        with self._lock:
            spent = self._failures.get(key, 0)
            if budget >= 0 and spent >= budget:
                return False
            self._failures[key] = spent + 1
            return True

    def set_fault(self, source: SourceSystem, fault: FaultProfile) -> None:
        with self._lock:
            self._faults[source] = fault

    def clear_failure_counts(self) -> None:
        with self._lock:
            self._failures.clear()
