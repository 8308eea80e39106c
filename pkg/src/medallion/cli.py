"""Command-line control plane.

Exit codes:
  0  command succeeded / scenario ran as expected
  1  pipeline run failed, or a scenario diverged from its expectations
  2  invalid arguments or request (bad dates, empty ranges, bad config)
  3  unknown id (dag, run, task, scenario)
  4  conflicting state (run already executing, task not clearable)
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from datetime import date, datetime, timezone
from pathlib import Path

from .clock import SimClock, ensure_utc
from .config import load_config, load_packaged_config
from .errors import (
    IllegalTransitionError,
    NotFoundError,
    UnknownTaskError,
    ValidationError,
)
from .runtime import Runtime, build_runtime
from .scenarios import ScenarioResult, list_scenarios, run_scenario
from .sources.faults import FaultMode, FaultProfile
from .store.types import SourceSystem, fmt_instant, parse_instant

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2
EXIT_NOT_FOUND = 3
EXIT_CONFLICT = 4

DEFAULT_DATA_DIR = "./medallion-data"


def _parse_date(raw: str) -> date:
    try:
        return date.fromisoformat(raw)
    except ValueError:
        raise ValidationError(f"not an ISO date: {raw!r}") from None


def _build(args) -> Runtime:
    if args.config:
        config = load_config(args.config)
    else:
        config = load_packaged_config()
    start = config.sim_start
    if args.sim_clock:
        try:
            start = ensure_utc(parse_instant(args.sim_clock))
        except ValueError as exc:
            raise ValidationError(f"--sim-clock: {exc}") from None
    data_dir = Path(args.data_dir or os.environ.get("MEDALLION_DATA_DIR", DEFAULT_DATA_DIR))
    return build_runtime(config, data_dir, clock=SimClock(start))


def _advance_to_morning(runtime: Runtime, day: date) -> None:
    morning = datetime(day.year, day.month, day.day, 6, 0, tzinfo=timezone.utc)
    if runtime.clock.now() < morning:
        runtime.clock.advance_to(morning)


def _task_line(task_id: str, doc: dict) -> str:
    extra = ""
    if doc.get("last_error"):
        extra = f"  ({doc['last_error'][:80]})"
    return f"  {task_id:<18} {doc['state']:<16} attempt={doc['attempt']}{extra}"


def _print_run(doc: dict) -> None:
    print(f"{doc['run_id']}: {doc['state']}  (triggered_by={doc['triggered_by']})")
    for task_id, task in doc["task_runs"].items():
        print(_task_line(task_id, task))


def cmd_run(args) -> int:
    runtime = _build(args)
    try:
        day = _parse_date(args.date)
        _advance_to_morning(runtime, day)
        run = runtime.orchestrator.execute_run(
            args.dag, day, triggered_by="cli", from_silver=args.from_silver
        )
        _print_run(run.to_doc())
        return EXIT_OK if run.state.value == "success" else EXIT_FAILED
    finally:
        runtime.close()


def cmd_backfill(args) -> int:
    runtime = _build(args)
    try:
        date_from = _parse_date(args.date_from)
        date_to = _parse_date(args.date_to)
        _advance_to_morning(runtime, date_to)
        started = time.monotonic()
        runs = runtime.orchestrator.backfill(
            args.dag, date_from, date_to,
            parallelism=args.parallelism, from_silver=not args.live,
        )
        elapsed = time.monotonic() - started
        by_state: dict[str, int] = {}
        for run in runs:
            by_state[run.state.value] = by_state.get(run.state.value, 0) + 1
        summary = ", ".join(f"{state}={n}" for state, n in sorted(by_state.items()))
        print(f"backfilled {len(runs)} runs in {elapsed:.1f}s: {summary}")
        print(f"connector fetch calls during backfill: {runtime.hub.fetch_calls}")
        return EXIT_OK if by_state.get("success") == len(runs) else EXIT_FAILED
    finally:
        runtime.close()


def cmd_status(args) -> int:
    runtime = _build(args)
    try:
        if args.run:
            _print_run(runtime.orchestrator.run_doc(args.run))
            return EXIT_OK
        docs = runtime.orchestrator.list_run_docs(args.dag)
        if not docs:
            print("no runs recorded")
            return EXIT_OK
        for doc in docs:
            states = [t["state"] for t in doc["task_runs"].values()]
            done = sum(1 for s in states if s == "success")
            print(f"{doc['run_id']:<28} {doc['state']:<18} tasks {done}/{len(states)} ok")
        return EXIT_OK
    finally:
        runtime.close()


def cmd_clear(args) -> int:
    runtime = _build(args)
    try:
        run = runtime.orchestrator.clear_state(args.run, args.task, resume=not args.no_resume)
        _print_run(run.to_doc())
        return EXIT_OK if run.state.value == "success" else EXIT_FAILED
    finally:
        runtime.close()


def cmd_dlq(args) -> int:
    runtime = _build(args)
    try:
        entries = runtime.store.list_dlq()
        if not entries:
            print("dead-letter queue is empty")
            return EXIT_OK
        for e in entries:
            meta = e.get("payload_metadata", {})
            chain = meta.get("error_chain", [])
            last = chain[-1][:80] if chain else ""
            print(f"{e['enqueued_at']}  {e['run_id']}/{e['task_id']}  "
                  f"attempts={meta.get('attempts', '?')}  {last}")
        return EXIT_OK
    finally:
        runtime.close()


def cmd_alerts(args) -> int:
    runtime = _build(args)
    try:
        alerts = runtime.store.list_alerts()
        if not alerts:
            print("no alerts")
            return EXIT_OK
        for a in alerts:
            key = a["alert_key"]
            print(f"{a['fired_at']}  {key['rule_id']}  team={key['team_id']} "
                  f"date={key['date']} value={a['value']:g}")
        return EXIT_OK
    finally:
        runtime.close()


def cmd_simulate(args) -> int:
    result = run_scenario(args.scenario, work_dir=args.work_dir)
    if args.json:
        print(json.dumps(result.to_doc(), indent=2))
    else:
        _print_scenario(result)
    return EXIT_OK if result.as_expected else EXIT_FAILED


def _print_scenario(result: ScenarioResult) -> None:
    print(f"scenario {result.scenario_id}")
    for a in result.assertions:
        mark = "PASS" if a.passed else "FAIL"
        detail = f"  [{a.detail}]" if (a.detail and not a.passed) else ""
        print(f"  {mark}  {a.name}{detail}")
    print(f"outcome: {result.outcome}")


def _seed_demo(runtime: Runtime) -> None:
    """A little history so the console opens onto something real: six clean
    days, a schema-rename failure on day seven (clearable once the patched
    schema is in place), and one CFR breach alert."""
    from datetime import timedelta

    from .monitor.consumer import AlertConsumer
    from .monitor.rules import default_rules

    dag_id = runtime.config.dag.dag_id
    d0 = runtime.config.sim_start.date()
    for i in range(6):
        day = d0 + timedelta(days=i)
        _advance_to_morning(runtime, day)
        runtime.orchestrator.execute_run(dag_id, day, triggered_by="demo")
    fault_day = d0 + timedelta(days=6)
    runtime.hub.set_fault(SourceSystem.JIRA, FaultProfile(
        mode=FaultMode.SCHEMA_RENAME, renamed_field=("created", "created_datetime"),
    ))
    _advance_to_morning(runtime, fault_day)
    runtime.orchestrator.execute_run(dag_id, fault_day, triggered_by="demo")
    patched = runtime.orchestrator.settings.schema.with_renamed_field(
        SourceSystem.JIRA, "created", "created_datetime"
    )
    runtime.orchestrator.settings = runtime.orchestrator.settings.with_schema(patched)
    AlertConsumer("alerts", runtime.store, default_rules(), runtime.clock).drain()
    print(f"demo data ready: {len(runtime.orchestrator.list_run_docs(dag_id))} runs, "
          f"{len(runtime.store.list_alerts())} alerts")


def cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app

    runtime = _build(args)
    try:
        if args.demo:
            _seed_demo(runtime)
        app = create_app(runtime)
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
        return EXIT_OK
    finally:
        runtime.close()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="medallion",
        description="Resilient ELT pipeline control plane",
        epilog="exit codes: 0 ok, 1 run failed/scenario diverged, 2 invalid, "
               "3 not found, 4 conflict",
    )
    parser.add_argument("--data-dir", default=None,
                        help=f"store location (env MEDALLION_DATA_DIR, default {DEFAULT_DATA_DIR})")
    parser.add_argument("--config", default=None, help="pipeline config YAML (default: packaged)")
    parser.add_argument("--sim-clock", default=None, metavar="INSTANT",
                        help="start the simulated clock at this UTC instant (default: config)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute one daily run end to end")
    p.add_argument("--dag", default="dora_daily")
    p.add_argument("--date", required=True, help="logical date, ISO")
    p.add_argument("--from-silver", action="store_true",
                   help="skip extraction, recompute Gold from stored Silver")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("backfill", help="run a date range, newest store wins")
    p.add_argument("--dag", default="dora_daily")
    p.add_argument("--from", dest="date_from", required=True)
    p.add_argument("--to", dest="date_to", required=True)
    p.add_argument("--parallelism", type=int, default=4)
    p.add_argument("--live", action="store_true",
                   help="re-extract from connectors instead of reusing Silver")
    p.set_defaults(func=cmd_backfill)

    p = sub.add_parser("status", help="list runs, or one run's task states")
    p.add_argument("--dag", default=None)
    p.add_argument("--run", default=None, help="run id for task-level detail")
    p.set_defaults(func=cmd_status)

    p = sub.add_parser("clear", help="reset a terminal task and resume the run")
    p.add_argument("--run", required=True)
    p.add_argument("--task", required=True)
    p.add_argument("--no-resume", action="store_true", help="reset only, do not drive")
    p.set_defaults(func=cmd_clear)

    p = sub.add_parser("dlq", help="show dead-lettered task attempts")
    p.set_defaults(func=cmd_dlq)

    p = sub.add_parser("alerts", help="show delivered alerts")
    p.set_defaults(func=cmd_alerts)

    p = sub.add_parser("simulate", help="run a named scenario and check its claims")
    p.add_argument("scenario", help=f"bundled ({', '.join(list_scenarios())}) or a YAML path")
    p.add_argument("--work-dir", default=None, help="scenario scratch dir (default: temp)")
    p.add_argument("--json", action="store_true", help="print the full result document")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("serve", help="start the HTTP control plane")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--demo", action="store_true", help="seed a week of demo data first")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UnknownTaskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_FOUND
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_FOUND
    except IllegalTransitionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFLICT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    raise SystemExit(main())
