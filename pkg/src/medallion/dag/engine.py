"""State-based DAG scheduler.

One scheduler loop owns each DagRun; task bodies execute on a bounded worker
pool, and every state mutation happens back on the loop thread under the
orchestrator lock. Task exceptions never escape the loop: they become task
state (retrying, failed, dead_lettered) and, through gating, downstream
upstream_failed marks.

Run identity is (dag_id, logical_date). Re-triggering a day resets and
re-drives the same run entity; every snapshot ever taken stays in the store,
so the full task history remains inspectable.
"""

from __future__ import annotations

import logging
import threading
import time
from concurrent.futures import FIRST_COMPLETED, Future, ThreadPoolExecutor, wait
from concurrent.futures import TimeoutError as FuturesTimeout
from datetime import date, timedelta
from typing import Iterable, Mapping, Optional

from ..clock import Clock, SimClock
from ..errors import (
    IllegalTransitionError,
    NotFoundError,
    RetryableError,
    SourceTimeoutError,
    ValidationError,
)
from ..settings import PipelineSettings
from ..sources.simulator import SourceHub
from ..store.engine import MedallionStore
from ..store.types import SourceSystem
from .backoff import compute_backoff
from .spec import DagSpec, TaskKind, validate_dag
from .state import (
    CLEARABLE_TASK_STATES,
    DagRun,
    DlqEntry,
    RunState,
    TaskRun,
    TaskState,
    run_id_for,
)
from .tasks import SensorTripped, TaskContext, run_task

logger = logging.getLogger(__name__)

_FAILED_STATES = frozenset({TaskState.FAILED, TaskState.DEAD_LETTERED, TaskState.UPSTREAM_FAILED})


def route_to_dlq(
    store: MedallionStore, run: DagRun, task_run: TaskRun, max_retries: int, clock: Clock,
    payload_metadata: Optional[dict] = None,
) -> DlqEntry:
    """Persist the exhausted task's context for manual inspection. Only a task
    that burned its whole attempt budget belongs here."""
    if task_run.state is not TaskState.FAILED or task_run.attempt != max_retries + 1:
        raise ValidationError(
            f"task {task_run.task_id} is not an exhausted failure "
            f"(state={task_run.state.value}, attempt={task_run.attempt})"
        )
    entry = DlqEntry(
        run_id=run.run_id,
        task_id=task_run.task_id,
        logical_date=run.logical_date,
        payload_metadata=payload_metadata or {},
        enqueued_at=clock.now(),
    )
    store.append_dlq(entry.to_doc())
    return entry


class Orchestrator:
    """Control plane over one store + one connector hub."""

    def __init__(
        self,
        store: MedallionStore,
        hub: SourceHub,
        clock: Clock,
        dags: Iterable[DagSpec] | Mapping[str, DagSpec],
        settings: PipelineSettings,
        *,
        worker_pool_size: int = 4,
        auto_advance: bool = True,
    ):
        if worker_pool_size < 1:
            raise ValidationError("worker_pool_size must be >= 1")
        self.store = store
        self.hub = hub
        self.clock = clock
        self.settings = settings
        self.worker_pool_size = worker_pool_size
        # With a simulated clock, waiting for a retry window to open means
        # jumping the clock there; with a wall clock it means sleeping.
        self.auto_advance = auto_advance
        specs = dags.values() if isinstance(dags, Mapping) else dags
        self._dags: dict[str, DagSpec] = {}
        self._topo: dict[str, list[str]] = {}
        for spec in specs:
            self._topo[spec.dag_id] = validate_dag(spec)
            self._dags[spec.dag_id] = spec
        self._lock = threading.RLock()
        self._active: set[str] = set()
        self._runs: dict[str, DagRun] = {}
        for doc in store.load_runs():
            run = DagRun.from_doc(doc)
            self._normalize_interrupted(run)
            self._runs[run.run_id] = run

    # ------------------------------------------------------------- inspection

    def dag_specs(self) -> list[DagSpec]:
        return [self._dags[d] for d in sorted(self._dags)]

    def dag_spec(self, dag_id: str) -> DagSpec:
        try:
            return self._dags[dag_id]
        except KeyError:
            raise NotFoundError(f"unknown dag {dag_id!r}") from None

    def get_run(self, run_id: str) -> DagRun:
        with self._lock:
            run = self._runs.get(run_id)
            if run is None:
                raise NotFoundError(f"unknown run {run_id!r}")
            return run

    def run_doc(self, run_id: str) -> dict:
        with self._lock:
            return self.get_run(run_id).to_doc()

    def list_run_docs(self, dag_id: Optional[str] = None) -> list[dict]:
        with self._lock:
            runs = [r for r in self._runs.values() if dag_id is None or r.dag_id == dag_id]
            runs.sort(key=lambda r: (r.dag_id, r.logical_date))
            return [r.to_doc() for r in runs]

    # -------------------------------------------------------------- execution

    def execute_run(
        self,
        dag_id: str,
        logical_date: date,
        *,
        triggered_by: str = "manual",
        from_silver: bool = False,
    ) -> DagRun:
        spec = self.dag_spec(dag_id)
        run = self._checkout_run(spec, logical_date, triggered_by, from_silver)
        try:
            self._drive(spec, run)
        finally:
            with self._lock:
                self._active.discard(run.run_id)
        return run

    def trigger(
        self, dag_id: str, logical_date: date, *, triggered_by: str = "manual",
        from_silver: bool = False,
    ) -> str:
        """Fire-and-return for the API: the run proceeds on its own thread."""
        spec = self.dag_spec(dag_id)
        run = self._checkout_run(spec, logical_date, triggered_by, from_silver)

        def drive():
            try:
                self._drive(spec, run)
            except Exception:
                logger.exception("run %s crashed the scheduler loop", run.run_id)
            finally:
                with self._lock:
                    self._active.discard(run.run_id)

        threading.Thread(target=drive, name=f"run-{run.run_id}", daemon=True).start()
        return run.run_id

    def backfill(
        self,
        dag_id: str,
        date_from: date,
        date_to: date,
        *,
        parallelism: int = 4,
        from_silver: bool = True,
    ) -> list[DagRun]:
        days = self._backfill_days(date_from, date_to, parallelism)
        with ThreadPoolExecutor(max_workers=parallelism, thread_name_prefix="backfill") as pool:
            futures = [
                pool.submit(
                    self.execute_run, dag_id, day,
                    triggered_by="backfill", from_silver=from_silver,
                )
                for day in days
            ]
            return [f.result() for f in futures]

    def trigger_backfill(
        self,
        dag_id: str,
        date_from: date,
        date_to: date,
        *,
        parallelism: int = 4,
        from_silver: bool = True,
    ) -> list[str]:
        spec = self.dag_spec(dag_id)
        days = self._backfill_days(date_from, date_to, parallelism)
        run_ids = [run_id_for(spec.dag_id, day) for day in days]

        def drive_all():
            try:
                self.backfill(
                    dag_id, date_from, date_to,
                    parallelism=parallelism, from_silver=from_silver,
                )
            except Exception:
                logger.exception("backfill %s..%s crashed", date_from, date_to)

        threading.Thread(target=drive_all, name=f"backfill-{dag_id}", daemon=True).start()
        return run_ids

    def _backfill_days(self, date_from: date, date_to: date, parallelism: int) -> list[date]:
        if date_to < date_from:
            raise ValidationError(f"empty backfill range {date_from}..{date_to}")
        if parallelism < 1:
            raise ValidationError("parallelism must be >= 1")
        return [date_from + timedelta(days=i) for i in range((date_to - date_from).days + 1)]

    def clear_state(self, run_id: str, task_id: str, *, resume: bool = True) -> DagRun:
        """Reset a terminal task (and everything downstream of it) to pending,
        then drive the run again from the point of failure. Finished upstream
        work is left alone; idempotent sinks absorb any overlap."""
        with self._lock:
            run = self.get_run(run_id)
            if run_id in self._active:
                raise IllegalTransitionError(f"run {run_id} is currently executing")
            spec = self.dag_spec(run.dag_id)
            task_run = run.task_runs.get(task_id)
            if task_run is None:
                raise NotFoundError(f"run {run_id} has no task {task_id!r}")
            if task_run.state not in CLEARABLE_TASK_STATES:
                raise IllegalTransitionError(
                    f"cannot clear task in state {task_run.state.value}; "
                    f"clearable states: {sorted(s.value for s in CLEARABLE_TASK_STATES)}"
                )
            now = self.clock.now()
            for tid in [task_id, *sorted(spec.transitive_downstream(task_id))]:
                tr = run.task_runs[tid]
                previous = tr.state.value
                tr.reset()
                run.record(now, tid, previous, TaskState.PENDING.value, note="clear_state")
            run.state = RunState.RUNNING
            run.record(now, run.run_id, "terminal", RunState.RUNNING.value, note="resumed")
            if resume:
                self._active.add(run_id)
        self._persist(run)
        if not resume:
            return run
        try:
            self._drive(spec, run)
        finally:
            with self._lock:
                self._active.discard(run_id)
        return run

    # ---------------------------------------------------------------- plumbing

    def _checkout_run(
        self, spec: DagSpec, logical_date: date, triggered_by: str, from_silver: bool
    ) -> DagRun:
        run_id = run_id_for(spec.dag_id, logical_date)
        with self._lock:
            if run_id in self._active:
                raise IllegalTransitionError(f"run {run_id} is already executing")
            run = self._runs.get(run_id)
            now = self.clock.now()
            if run is None:
                run = DagRun(
                    run_id=run_id, dag_id=spec.dag_id, logical_date=logical_date,
                    triggered_by=triggered_by, from_silver=from_silver,
                )
                self._runs[run_id] = run
            else:
                run.triggered_by = triggered_by
                run.from_silver = from_silver
                run.state = RunState.RUNNING
                run.record(now, run.run_id, "terminal", RunState.RUNNING.value, note="re-triggered")
            for task in spec.tasks:
                existing = run.task_runs.get(task.task_id)
                if existing is None:
                    run.task_runs[task.task_id] = TaskRun(task_id=task.task_id)
                else:
                    existing.reset()
            run.record(now, run.run_id, "idle", RunState.RUNNING.value, note=f"triggered_by={triggered_by}")
            self._active.add(run_id)
        self._persist(run)
        return run

    def _drive(self, spec: DagSpec, run: DagRun) -> None:
        topo = self._topo[spec.dag_id]
        topo_index = {tid: i for i, tid in enumerate(topo)}
        pool = ThreadPoolExecutor(
            max_workers=self.worker_pool_size, thread_name_prefix=f"task-{run.run_id}"
        )
        futures: dict[Future, str] = {}
        try:
            while True:
                with self._lock:
                    self._propagate_upstream_failures(spec, run, topo)
                    self._promote_eligible(run, topo)
                    self._queue_ready(spec, run, topo)
                    to_dispatch = []
                    for tid in sorted(
                        (t for t in topo if run.task_runs[t].state is TaskState.QUEUED),
                        key=lambda t: (topo_index[t], t),
                    ):
                        if len(futures) + len(to_dispatch) >= self.worker_pool_size:
                            break
                        to_dispatch.append(tid)
                    for tid in to_dispatch:
                        task_run = run.task_runs[tid]
                        task_run.transition(TaskState.RUNNING)
                        task_run.attempt += 1
                        run.record(
                            self.clock.now(), tid, TaskState.QUEUED.value,
                            TaskState.RUNNING.value, note=f"attempt={task_run.attempt}",
                        )
                        ctx = self._context(spec, run, tid, task_run.attempt)
                        futures[pool.submit(self._call_body, ctx)] = tid
                if futures:
                    done, _ = wait(set(futures), return_when=FIRST_COMPLETED)
                    for future in done:
                        tid = futures.pop(future)
                        self._absorb(spec, run, tid, future)
                    continue
                with self._lock:
                    retrying = [
                        run.task_runs[t] for t in topo
                        if run.task_runs[t].state is TaskState.RETRYING
                    ]
                    if not retrying:
                        break
                    next_eligible = min(t.next_eligible_at for t in retrying)
                if self.auto_advance and isinstance(self.clock, SimClock):
                    if self.clock.now() < next_eligible:
                        self.clock.advance_to(next_eligible)
                else:
                    time.sleep(0.02)
        finally:
            pool.shutdown(wait=True)
        self._finalize(spec, run)

    def _context(self, spec: DagSpec, run: DagRun, task_id: str, attempt: int) -> TaskContext:
        finished = {
            tid: tr.telemetry
            for tid, tr in run.task_runs.items()
            if tr.state is TaskState.SUCCESS
        }
        return TaskContext(
            store=self.store,
            hub=self.hub,
            clock=self.clock,
            settings=self.settings,
            dag=spec,
            run_id=run.run_id,
            logical_date=run.logical_date,
            task=spec.task(task_id),
            attempt=attempt,
            from_silver=run.from_silver,
            task_telemetry=finished,
        )

    @staticmethod
    def _call_body(ctx: TaskContext):
        timeout_s = ctx.task.params.get("execution_timeout_seconds")
        if not timeout_s:
            return run_task(ctx)
        # Zombie-task guard: a body that outlives its budget counts as a
        # failed (retryable) attempt. The worker thread itself cannot be
        # killed; simulated bodies always return eventually.
        sidecar = ThreadPoolExecutor(max_workers=1, thread_name_prefix="timeout-guard")
        try:
            future = sidecar.submit(run_task, ctx)
            try:
                return future.result(timeout=float(timeout_s))
            except FuturesTimeout:
                raise SourceTimeoutError(
                    f"task {ctx.task.task_id} exceeded {timeout_s}s execution timeout"
                ) from None
        finally:
            sidecar.shutdown(wait=False)

    def _propagate_upstream_failures(self, spec: DagSpec, run: DagRun, topo: list[str]) -> None:
        for tid in topo:
            task_run = run.task_runs[tid]
            if task_run.state is not TaskState.PENDING:
                continue
            if any(run.task_runs[u].state in _FAILED_STATES for u in spec.upstream_of(tid)):
                task_run.transition(TaskState.UPSTREAM_FAILED)
                run.record(
                    self.clock.now(), tid, TaskState.PENDING.value, TaskState.UPSTREAM_FAILED.value
                )
                self._persist(run)

    def _promote_eligible(self, run: DagRun, topo: list[str]) -> None:
        now = self.clock.now()
        for tid in topo:
            task_run = run.task_runs[tid]
            if task_run.state is TaskState.RETRYING and now >= task_run.next_eligible_at:
                task_run.transition(TaskState.QUEUED)
                run.record(now, tid, TaskState.RETRYING.value, TaskState.QUEUED.value)

    def _queue_ready(self, spec: DagSpec, run: DagRun, topo: list[str]) -> None:
        for tid in topo:
            task_run = run.task_runs[tid]
            if task_run.state is not TaskState.PENDING:
                continue
            upstream = spec.upstream_of(tid)
            if all(run.task_runs[u].state is TaskState.SUCCESS for u in upstream):
                task_run.transition(TaskState.QUEUED)
                run.record(self.clock.now(), tid, TaskState.PENDING.value, TaskState.QUEUED.value)

    def _absorb(self, spec: DagSpec, run: DagRun, task_id: str, future: Future) -> None:
        with self._lock:
            task_run = run.task_runs[task_id]
            now = self.clock.now()
            try:
                telemetry = future.result()
            except SensorTripped as trip:
                task_run.last_error = str(trip)
                task_run.telemetry = {
                    "sensor_tripped": True,
                    "source": trip.source.value,
                    "fetched_count": trip.result.fetched_count,
                    "moving_average": trip.result.moving_average,
                    "reason": trip.result.reason,
                }
                task_run.transition(TaskState.FAILED)
                run.record(now, task_id, TaskState.RUNNING.value, TaskState.FAILED.value,
                           note="sensor tripped")
            except RetryableError as exc:
                self._absorb_retryable(spec, run, task_run, exc, now)
            except Exception as exc:  # non-retryable: fail fast, no DLQ
                task_run.last_error = f"{type(exc).__name__}: {exc}"
                task_run.transition(TaskState.FAILED)
                run.record(now, task_id, TaskState.RUNNING.value, TaskState.FAILED.value,
                           note=task_run.last_error)
            else:
                task_run.telemetry = telemetry
                task_run.last_error = None
                task_run.transition(TaskState.SUCCESS)
                run.record(now, task_id, TaskState.RUNNING.value, TaskState.SUCCESS.value)
            self._persist(run)

    def _absorb_retryable(
        self, spec: DagSpec, run: DagRun, task_run: TaskRun, exc: RetryableError, now
    ) -> None:
        policy = spec.retry_policy
        message = f"{type(exc).__name__}: {exc}"
        task_run.last_error = message
        chain = task_run.telemetry.setdefault("error_chain", [])
        chain.append(message)
        if task_run.attempt <= policy.max_retries:
            delay = compute_backoff(task_run.attempt, policy.base_delay, policy.max_delay)
            task_run.next_eligible_at = now + delay
            task_run.transition(TaskState.RETRYING)
            run.record(
                now, task_run.task_id, TaskState.RUNNING.value, TaskState.RETRYING.value,
                note=f"retry in {delay.total_seconds() / 60:g} min",
            )
        else:
            task_run.transition(TaskState.FAILED)
            run.record(now, task_run.task_id, TaskState.RUNNING.value, TaskState.FAILED.value,
                       note="retries exhausted")
            task = spec.task(task_run.task_id)
            route_to_dlq(
                self.store, run, task_run, policy.max_retries, self.clock,
                payload_metadata={
                    "task_kind": task.kind.value,
                    "params": dict(task.params),
                    "attempts": task_run.attempt,
                    "error_chain": list(chain),
                },
            )
            task_run.transition(TaskState.DEAD_LETTERED)
            run.record(now, task_run.task_id, TaskState.FAILED.value,
                       TaskState.DEAD_LETTERED.value, note="routed to DLQ")

    def _finalize(self, spec: DagSpec, run: DagRun) -> None:
        with self._lock:
            states = [tr.state for tr in run.task_runs.values()]
            if all(s is TaskState.SUCCESS for s in states):
                run.state = RunState.SUCCESS
            elif any(
                tr.state is TaskState.FAILED and tr.telemetry.get("sensor_tripped")
                for tr in run.task_runs.values()
            ):
                run.state = RunState.HALTED_BY_SENSOR
            else:
                run.state = RunState.FAILED
            run.record(self.clock.now(), run.run_id, RunState.RUNNING.value, run.state.value)
            if run.state is RunState.SUCCESS and not run.from_silver:
                self._record_volume_history(spec, run)
        self._persist(run)

    def _record_volume_history(self, spec: DagSpec, run: DagRun) -> None:
        """Feed the sentinels' baseline. Only successful, non-halted live runs
        get here, so a phantom-zero day never drags the average down."""
        for task in spec.tasks:
            if task.kind is TaskKind.TRANSFORM:
                telemetry = run.task_runs[task.task_id].telemetry
                for source_name, count in telemetry.get("processed_by_source", {}).items():
                    self.store.record_volume(SourceSystem(source_name), run.logical_date, int(count))
                return

    def _persist(self, run: DagRun) -> None:
        with self._lock:
            doc = run.to_doc()
        self.store.save_run(doc)

    def _normalize_interrupted(self, run: DagRun) -> None:
        if run.state is not RunState.RUNNING:
            return
        for task_run in run.task_runs.values():
            if task_run.state in (TaskState.QUEUED, TaskState.RUNNING):
                task_run.state = TaskState.FAILED
                task_run.last_error = "interrupted by restart"
        states = [tr.state for tr in run.task_runs.values()]
        run.state = RunState.SUCCESS if all(s is TaskState.SUCCESS for s in states) else RunState.FAILED
