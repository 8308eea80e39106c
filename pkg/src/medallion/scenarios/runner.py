"""Named end-to-end scenarios.

Each bundled YAML file names a playbook plus parameters; the playbook drives
real pipelines on throwaway data directories and records assertions. The
result is machine-checkable: outcome is as_expected iff every assertion
passed, which is also the CLI exit code contract for `simulate`.
"""

from __future__ import annotations

import tempfile
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Mapping, Optional

import yaml

from ..config import AppConfig, default_config
from ..errors import NotFoundError, ValidationError
from ..monitor.consumer import AlertConsumer
from ..monitor.rules import default_rules
from ..runtime import Runtime, build_runtime
from ..sources.faults import FaultMode, FaultProfile
from ..store.engine import MedallionStore
from ..store.types import (
    EventKey,
    EventType,
    GoldMetric,
    MetricType,
    SilverEvent,
    SourceSystem,
    fmt_instant,
    parse_instant,
)

DATA_PACKAGE = "medallion.scenarios"


@dataclass(frozen=True)
class ScenarioAssertion:
    name: str
    passed: bool
    detail: str = ""

    def to_doc(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass
class ScenarioResult:
    scenario_id: str
    outcome: str  # as_expected | divergent
    transcript: list[dict]
    assertions: list[ScenarioAssertion]

    @property
    def as_expected(self) -> bool:
        return self.outcome == "as_expected"

    def to_doc(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "outcome": self.outcome,
            "transcript": list(self.transcript),
            "assertions": [a.to_doc() for a in self.assertions],
        }


class Recorder:
    """Collects the transition log and assertion outcomes for one scenario."""

    def __init__(self):
        self.transcript: list[dict] = []
        self.assertions: list[ScenarioAssertion] = []

    def check(self, name: str, condition: bool, detail: str = "") -> bool:
        self.assertions.append(ScenarioAssertion(name=name, passed=bool(condition), detail=detail))
        return bool(condition)

    def note(self, subject: str, note: str, at: Optional[datetime] = None) -> None:
        entry = {"subject": subject, "from": "", "to": "", "note": note}
        if at is not None:
            entry["at"] = fmt_instant(at)
        self.transcript.append(entry)

    def absorb_run(self, label: str, run) -> None:
        for entry in run.transcript:
            merged = dict(entry)
            merged["pipeline"] = label
            self.transcript.append(merged)

    def result(self, scenario_id: str) -> ScenarioResult:
        outcome = "as_expected" if all(a.passed for a in self.assertions) else "divergent"
        return ScenarioResult(
            scenario_id=scenario_id,
            outcome=outcome,
            transcript=self.transcript,
            assertions=self.assertions,
        )


def _morning_of(day) -> datetime:
    return datetime(day.year, day.month, day.day, 6, 0, tzinfo=timezone.utc)


def _run_live_day(runtime: Runtime, day) -> Any:
    if runtime.clock.now() < _morning_of(day):
        runtime.clock.advance_to(_morning_of(day))
    return runtime.orchestrator.execute_run(runtime.config.dag.dag_id, day)


# --------------------------------------------------------------------- books


def phantom_zero(params: Mapping[str, Any], work_dir: Path, rec: Recorder) -> None:
    """Same poisoned day through two configurations: the legacy pipeline
    publishes a zero, the sentinel pipeline refuses to."""
    seed = int(params.get("seed", 42))
    warmup_days = int(params.get("warmup_days", 8))
    config = default_config(seed=seed)
    legacy_config = config.with_settings(replace(config.settings, sensors_enabled=False))

    sentinel = build_runtime(config, work_dir / "sentinel")
    legacy = build_runtime(legacy_config, work_dir / "legacy")
    d0 = config.sim_start.date()
    for i in range(warmup_days):
        day = d0 + timedelta(days=i)
        for runtime in (sentinel, legacy):
            run = _run_live_day(runtime, day)
            if run.state.value != "success":
                rec.check(f"warmup day {day} clean", False, f"{run.state.value}")
                return
    rec.note("scenario", f"warmup complete: {warmup_days} clean days on both pipelines")

    fault_day = d0 + timedelta(days=warmup_days)
    fault = FaultProfile(mode=FaultMode.SILENT_TRUNCATION, truncate_after_page=0)
    for runtime in (sentinel, legacy):
        runtime.hub.set_fault(SourceSystem.JENKINS, fault)
    rec.note("scenario", f"silent truncation injected on jenkins for {fault_day}")

    legacy_run = _run_live_day(legacy, fault_day)
    rec.absorb_run("legacy", legacy_run)
    sentinel.clock.advance_to(_morning_of(fault_day))
    sentinel_started_at = sentinel.clock.now()
    sentinel_run = _run_live_day(sentinel, fault_day)
    rec.absorb_run("sentinel", sentinel_run)

    rec.check(
        "legacy run completes despite the truncation",
        legacy_run.state.value == "success",
        f"state={legacy_run.state.value}",
    )
    df_rows = legacy.store.query_gold(
        fault_day, fault_day, metric_type=MetricType.DEPLOYMENT_FREQUENCY
    )
    rec.check(
        "legacy publishes deployment_frequency = 0 for every team",
        len(df_rows) == len(config.settings.teams) and all(m.value == 0.0 for m in df_rows),
        f"values={[(m.team_id, m.value) for m in df_rows]}",
    )
    rec.check(
        "legacy never raises a phantom-zero alert",
        not any(
            a["alert_key"]["rule_id"].startswith("sentinel:phantom_zero")
            for a in legacy.store.list_alerts()
        ),
        f"alerts={len(legacy.store.list_alerts())}",
    )

    rec.check(
        "sentinel run halts",
        sentinel_run.state.value == "halted_by_sensor",
        f"state={sentinel_run.state.value}",
    )
    rec.check(
        "sentinel writes no Gold for the poisoned day",
        not sentinel.store.query_gold(fault_day, fault_day),
        f"gold_rows={len(sentinel.store.query_gold(fault_day, fault_day))}",
    )
    phantom_alerts = [
        a for a in sentinel.store.list_alerts()
        if a["alert_key"]["rule_id"] == "sentinel:phantom_zero:jenkins"
    ]
    ok = rec.check("sentinel raises exactly one phantom-zero alert", len(phantom_alerts) == 1,
                   f"count={len(phantom_alerts)}")
    if ok:
        detected_after = parse_instant(phantom_alerts[0]["fired_at"]) - sentinel_started_at
        rec.check(
            "detection lands within one simulated hour of the run starting",
            timedelta(0) <= detected_after < timedelta(hours=1),
            f"detected_after={detected_after}",
        )
    sentinel.close()
    legacy.close()


def schema_change(params: Mapping[str, Any], work_dir: Path, rec: Recorder) -> None:
    """Upstream renames the field lead time depends on: fail fast, patch the
    schema, clear the extract, resume without duplicates."""
    seed = int(params.get("seed", 42))
    config = default_config(seed=seed)
    rename = FaultProfile(
        mode=FaultMode.SCHEMA_RENAME, renamed_field=("created", "created_datetime")
    )
    main = build_runtime(config, work_dir / "main")
    d0 = config.sim_start.date()
    day_two = d0 + timedelta(days=1)

    clean = _run_live_day(main, d0)
    rec.check("day one ingests cleanly", clean.state.value == "success", clean.state.value)

    main.hub.set_fault(SourceSystem.JIRA, rename)
    rec.note("scenario", f"jira payloads rename 'created' to 'created_datetime' from {day_two}")
    broken = _run_live_day(main, day_two)
    rec.absorb_run("main", broken)
    extract = broken.task_runs["extract_jira"]
    rec.check("run fails", broken.state.value == "failed", broken.state.value)
    rec.check(
        "extract fails fast on the first attempt, naming the field",
        extract.state.value == "failed" and extract.attempt == 1
        and "created" in (extract.last_error or ""),
        f"state={extract.state.value} attempt={extract.attempt} err={extract.last_error}",
    )
    rec.check(
        "downstream tasks are upstream_failed, not run",
        broken.task_runs["transform"].state.value == "upstream_failed"
        and broken.task_runs["aggregate"].state.value == "upstream_failed",
        "",
    )
    rec.check("nothing is dead-lettered", main.store.list_dlq() == [], "")

    patched = config.settings.schema.with_renamed_field(
        SourceSystem.JIRA, "created", "created_datetime"
    )
    main.orchestrator.settings = main.orchestrator.settings.with_schema(patched)
    rec.note("scenario", "parser schema patched; clearing the failed extract")
    resumed = main.orchestrator.clear_state(broken.run_id, "extract_jira")
    rec.absorb_run("main", resumed)
    rec.check("cleared run resumes to success", resumed.state.value == "success",
              resumed.state.value)
    rec.check(
        "completed branches were not re-run",
        resumed.task_runs["extract_github"].attempt == 1,
        f"github_attempt={resumed.task_runs['extract_github'].attempt}",
    )

    # The control lives in the post-rename world from the start: fault active
    # on day one too, schema already patched. Parsed values are name-agnostic,
    # so its store is the no-incident baseline for both days.
    control = build_runtime(
        config.with_settings(config.settings.with_schema(patched)), work_dir / "control"
    )
    control.hub.set_fault(SourceSystem.JIRA, rename)
    first_control = _run_live_day(control, d0)
    control_run = _run_live_day(control, day_two)
    rec.check(
        "control pipeline (patched up front) is clean on both days",
        first_control.state.value == "success" and control_run.state.value == "success",
        f"{first_control.state.value}/{control_run.state.value}",
    )

    rec.check(
        "no duplicates: Silver record count equals the single clean run",
        main.store.silver_count() == control.store.silver_count(),
        f"main={main.store.silver_count()} control={control.store.silver_count()}",
    )
    rec.check(
        "no duplicates: Gold record count equals the single clean run",
        main.store.gold_count() == control.store.gold_count(),
        f"main={main.store.gold_count()} control={control.store.gold_count()}",
    )
    for runtime in (main, control):
        runtime.store.compact_silver()
        runtime.store.compact_gold()
    rec.check(
        "recovered store is byte-identical to the clean one",
        main.store.silver_segment_bytes() == control.store.silver_segment_bytes()
        and main.store.gold_segment_bytes() == control.store.gold_segment_bytes(),
        "",
    )
    main.close()
    control.close()


def consumer_crash(params: Mapping[str, Any], work_dir: Path, rec: Recorder) -> None:
    """Ten Gold writes with one breach; the consumer dies after checkpointing
    token 4 and must replay the rest exactly once on restart."""
    from ..clock import SimClock

    config = default_config()
    quiet_before = int(params.get("quiet_before", 6))
    quiet_after = int(params.get("quiet_after", 3))
    breach_value = float(params.get("breach_value", 0.5))
    kill_after = int(params.get("kill_after_token", 4))

    clock = SimClock(config.sim_start)
    store = MedallionStore(work_dir / "monitor", clock=clock)
    d0 = config.sim_start.date()
    values = [0.05] * quiet_before + [breach_value] + [0.05] * quiet_after
    breach_token = quiet_before + 1
    for i, value in enumerate(values):
        metric = GoldMetric(
            date=d0 + timedelta(days=i),
            team_id="team-a",
            metric_type=MetricType.CHANGE_FAILURE_RATE,
            value=value,
            computed_at=clock.now(),
            execution_id="seed",
        )
        _, event = store.upsert_gold(metric)
        rec.note("gold", f"token {event.token} cfr={value}", at=clock.now())

    first = AlertConsumer(
        "alerts", store, default_rules(), clock, stop_after_checkpoint=kill_after
    )
    processed = first.drain()
    rec.note("consumer", f"processed {processed} events, killed after checkpoint {kill_after}")
    checkpoint = store.read_checkpoint("alerts")
    rec.check(
        f"checkpoint persisted at token {kill_after} when the consumer dies",
        checkpoint is not None and checkpoint["last_processed_token"] == kill_after,
        f"checkpoint={checkpoint}",
    )
    rec.check("no alert delivered before the crash", store.list_alerts() == [],
              f"alerts={len(store.list_alerts())}")

    restarted = AlertConsumer("alerts", store, default_rules(), clock)
    restarted.drain()
    rec.note("consumer", f"restart replayed tokens {restarted.stats.tokens_seen}")
    rec.check(
        "restart replays every token after the checkpoint",
        restarted.stats.tokens_seen == list(range(kill_after + 1, len(values) + 1)),
        f"tokens={restarted.stats.tokens_seen}",
    )
    alerts = store.list_alerts()
    rec.check("exactly one alert lands in the sink", len(alerts) == 1, f"count={len(alerts)}")
    rec.check(
        "the alert points at the breach event",
        bool(alerts) and alerts[0]["triggering_token"] == breach_token,
        f"token={alerts[0]['triggering_token'] if alerts else None}",
    )
    final = store.read_checkpoint("alerts")
    rec.check(
        "checkpoint caught up to the head of the stream",
        final["last_processed_token"] == len(values),
        f"checkpoint={final}",
    )
    store.close()


def _seed_silver_year(store: MedallionStore, teams, d0, days: int) -> int:
    """Deterministic hand-rolled activity: a couple of commits, one linked
    deploy, and a periodic incident per team per day. Small on purpose; the
    scenario is about the backfill machinery, not volume."""
    written = 0
    for i in range(days):
        day = d0 + timedelta(days=i)
        base = datetime(day.year, day.month, day.day, tzinfo=timezone.utc)
        for t, team in enumerate(teams):
            shas = [f"{t}{i:05d}{j}" for j in range(2)]
            for j, sha in enumerate(shas):
                store.upsert_silver(SilverEvent(
                    event_key=EventKey(SourceSystem.GITHUB, f"c-{team}-{i}-{j}"),
                    event_type=EventType.COMMIT,
                    occurred_at=base + timedelta(hours=9 + j),
                    contributor_id=f"{team}/dev0",
                    team_id=team,
                    repository=f"{team}/repo-0",
                    attributes={"commit_sha": sha, "message": f"change {i}.{j}"},
                ))
                written += 1
            store.upsert_silver(SilverEvent(
                event_key=EventKey(SourceSystem.JENKINS, f"d-{team}-{i}"),
                event_type=EventType.DEPLOYMENT,
                occurred_at=base + timedelta(hours=15),
                contributor_id=f"{team}/dev0",
                team_id=team,
                repository=f"{team}/repo-0",
                attributes={
                    "job_name": "deploy-prod", "job_type": "deploy",
                    "status": "SUCCESS", "linked_commit_sha": shas[0],
                },
            ))
            written += 1
            if i % 3 == t % 3:
                incident_id = f"OPS-{team}-{i}"
                for event_type, hour, suffix in (
                    (EventType.INCIDENT_OPENED, 12, "open"),
                    (EventType.INCIDENT_RESOLVED, 14, "resolve"),
                ):
                    store.upsert_silver(SilverEvent(
                        event_key=EventKey(SourceSystem.JIRA, f"{incident_id}:{suffix}"),
                        event_type=event_type,
                        occurred_at=base + timedelta(hours=hour),
                        contributor_id=f"{team}/dev1",
                        team_id=team,
                        repository=f"{team}/repo-0",
                        attributes={"incident_id": incident_id, "severity": "P2"},
                    ))
                    written += 1
    return written


def backfill_365(params: Mapping[str, Any], work_dir: Path, rec: Recorder) -> None:
    """A year of Gold from Silver alone: no connector calls, any parallelism,
    same bytes."""
    days = int(params.get("days", 365))
    wide_parallelism = int(params.get("parallelism", 8))
    narrow_parallelism = int(params.get("compare_parallelism", 1))
    budget_seconds = float(params.get("budget_seconds", 60))
    config = default_config()
    d0 = config.sim_start.date()
    last = d0 + timedelta(days=days - 1)

    runtimes = {}
    for label in ("wide", "narrow"):
        runtime = build_runtime(config, work_dir / label)
        seeded = _seed_silver_year(runtime.store, config.settings.teams, d0, days)
        runtimes[label] = runtime
        rec.note("scenario", f"{label}: seeded {seeded} silver events across {days} days")

    started = time.monotonic()
    wide = runtimes["wide"]
    calls_before = wide.hub.fetch_calls
    wide_runs = wide.orchestrator.backfill(
        config.dag.dag_id, d0, last, parallelism=wide_parallelism
    )
    elapsed = time.monotonic() - started
    rec.note("scenario", f"wide backfill of {days} days took {elapsed:.2f}s wall-clock")

    rec.check(
        f"all {days} runs succeed",
        all(r.state.value == "success" for r in wide_runs) and len(wide_runs) == days,
        f"states={sorted({r.state.value for r in wide_runs})}",
    )
    rec.check(
        "connector fetch-call counter stays untouched",
        wide.hub.fetch_calls == calls_before,
        f"delta={wide.hub.fetch_calls - calls_before}",
    )
    rec.check(
        f"wall-clock under {budget_seconds:g}s",
        elapsed < budget_seconds,
        f"elapsed={elapsed:.2f}s",
    )

    narrow = runtimes["narrow"]
    narrow.orchestrator.backfill(config.dag.dag_id, d0, last, parallelism=narrow_parallelism)
    for runtime in runtimes.values():
        runtime.store.compact_gold()
    rec.check(
        f"gold bytes identical for parallelism {narrow_parallelism} vs {wide_parallelism}",
        runtimes["narrow"].store.gold_segment_bytes() == wide.store.gold_segment_bytes(),
        "",
    )
    gold_total = wide.store.gold_count()
    rec.check("gold was actually produced", gold_total >= days, f"rows={gold_total}")
    for runtime in runtimes.values():
        runtime.close()


PLAYBOOKS: dict[str, Callable[[Mapping[str, Any], Path, Recorder], None]] = {
    "phantom_zero": phantom_zero,
    "schema_change": schema_change,
    "consumer_crash": consumer_crash,
    "backfill_365": backfill_365,
}


def list_scenarios() -> list[str]:
    data = resources.files(DATA_PACKAGE).joinpath("data")
    return sorted(p.name.removesuffix(".yaml") for p in data.iterdir() if p.name.endswith(".yaml"))


def load_scenario(name_or_path: str) -> dict:
    path = Path(name_or_path)
    if path.suffix in (".yaml", ".yml") and path.exists():
        raw = path.read_text(encoding="utf-8")
    else:
        packaged = resources.files(DATA_PACKAGE).joinpath(f"data/{name_or_path}.yaml")
        if not packaged.is_file():
            raise NotFoundError(
                f"unknown scenario {name_or_path!r}; bundled: {', '.join(list_scenarios())}"
            )
        raw = packaged.read_text(encoding="utf-8")
    doc = yaml.safe_load(raw)
    for key in ("scenario_id", "playbook"):
        if key not in doc:
            raise ValidationError(f"scenario file is missing {key!r}")
    if doc["playbook"] not in PLAYBOOKS:
        raise ValidationError(f"unknown playbook {doc['playbook']!r}")
    return doc


def run_scenario(name_or_path: str, work_dir: Optional[Path | str] = None) -> ScenarioResult:
    doc = load_scenario(name_or_path)
    if work_dir is None:
        work_dir = Path(tempfile.mkdtemp(prefix=f"scenario-{doc['scenario_id']}-"))
    else:
        work_dir = Path(work_dir)
        work_dir.mkdir(parents=True, exist_ok=True)
    rec = Recorder()
    rec.note("scenario", f"{doc['scenario_id']}: {doc.get('title', '')}".strip())
    PLAYBOOKS[doc["playbook"]](doc.get("params", {}) or {}, work_dir, rec)
    return rec.result(doc["scenario_id"])
