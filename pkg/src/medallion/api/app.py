"""HTTP control plane.

Thin view/controller over the orchestrator and the store: every route is a
library call plus serialization, so anything the API can do is reproducible
from Python and vice versa. Field names here are a contract consumed by the
operator console; changing them breaks it.
"""

from __future__ import annotations

from datetime import date, datetime
from typing import Any, Mapping, Optional

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from ..clock import SimClock, ensure_utc
from ..errors import (
    IllegalTransitionError,
    NotFoundError,
    UnknownTaskError,
    ValidationError,
)
from ..runtime import Runtime
from ..store.types import MetricType, SourceSystem, fmt_instant, parse_instant

API_VERSION = "1"


def _bad_request(detail: str) -> JSONResponse:
    return JSONResponse(status_code=400, content={"detail": detail})


def _parse_day(raw: Any, field: str) -> date:
    if not isinstance(raw, str):
        raise ValidationError(f"{field} must be an ISO date string, got {raw!r}")
    try:
        return date.fromisoformat(raw)
    except ValueError:
        raise ValidationError(f"{field} is not a valid ISO date: {raw!r}") from None


def _require(payload: Mapping[str, Any] | None, field: str) -> Any:
    if not isinstance(payload, Mapping) or field not in payload:
        raise ValidationError(f"request body is missing {field!r}")
    return payload[field]


def create_app(runtime: Runtime, *, sim_mode: Optional[bool] = None) -> FastAPI:
    """Build the application around an already-assembled runtime.

    sim_mode defaults to whether the runtime's clock is simulated; the clock
    route only exists in that mode so a production deployment cannot have its
    notion of time poked over HTTP.
    """
    if sim_mode is None:
        sim_mode = isinstance(runtime.clock, SimClock)
    app = FastAPI(title="medallion control plane", version=API_VERSION, docs_url="/docs")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.runtime = runtime
    orchestrator = runtime.orchestrator
    store = runtime.store

    @app.exception_handler(NotFoundError)
    async def _not_found(_request: Request, exc: NotFoundError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(UnknownTaskError)
    async def _unknown_task(_request: Request, exc: UnknownTaskError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(ValidationError)
    async def _invalid(_request: Request, exc: ValidationError):
        return _bad_request(str(exc))

    @app.exception_handler(IllegalTransitionError)
    async def _conflict(_request: Request, exc: IllegalTransitionError):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "now": fmt_instant(runtime.clock.now()),
            "sim_mode": sim_mode,
            "api_version": API_VERSION,
        }

    @app.get("/dags")
    def list_dags():
        return {"dags": [spec.to_doc() for spec in orchestrator.dag_specs()]}

    @app.get("/dags/{dag_id}")
    def get_dag(dag_id: str):
        return orchestrator.dag_spec(dag_id).to_doc()

    @app.get("/dags/{dag_id}/runs")
    def list_runs(dag_id: str):
        orchestrator.dag_spec(dag_id)  # 404 before returning an empty list
        return {"runs": orchestrator.list_run_docs(dag_id)}

    @app.get("/runs/{run_id}")
    def get_run(run_id: str):
        return orchestrator.run_doc(run_id)

    @app.post("/dags/{dag_id}/trigger", status_code=202)
    def trigger(dag_id: str, payload: Optional[dict] = None):
        logical_date = _parse_day(_require(payload, "logical_date"), "logical_date")
        from_silver = bool((payload or {}).get("from_silver", False))
        run_id = orchestrator.trigger(
            dag_id, logical_date, triggered_by="api", from_silver=from_silver
        )
        return {"run_id": run_id, "state": "accepted"}

    @app.post("/dags/{dag_id}/backfill", status_code=202)
    def backfill(dag_id: str, payload: Optional[dict] = None):
        date_from = _parse_day(_require(payload, "from"), "from")
        date_to = _parse_day(_require(payload, "to"), "to")
        parallelism = (payload or {}).get("parallelism", 4)
        if not isinstance(parallelism, int) or isinstance(parallelism, bool):
            raise ValidationError(f"parallelism must be an integer, got {parallelism!r}")
        from_silver = bool((payload or {}).get("from_silver", True))
        run_ids = orchestrator.trigger_backfill(
            dag_id, date_from, date_to, parallelism=parallelism, from_silver=from_silver
        )
        return {"run_ids": run_ids, "count": len(run_ids), "state": "accepted"}

    @app.post("/runs/{run_id}/tasks/{task_id}/clear")
    def clear_task(run_id: str, task_id: str, payload: Optional[dict] = None):
        resume = bool((payload or {}).get("resume", True))
        run = orchestrator.clear_state(run_id, task_id, resume=resume)
        return run.to_doc()

    @app.get("/dlq")
    def list_dlq():
        return {"entries": store.list_dlq()}

    @app.get("/alerts")
    def list_alerts():
        return {"alerts": store.list_alerts()}

    @app.get("/gold")
    def query_gold(
        date_from: str,
        date_to: str,
        team_id: Optional[str] = None,
        metric_type: Optional[str] = None,
    ):
        lo = _parse_day(date_from, "date_from")
        hi = _parse_day(date_to, "date_to")
        metric: Optional[MetricType] = None
        if metric_type is not None:
            try:
                metric = MetricType(metric_type)
            except ValueError:
                raise ValidationError(
                    f"unknown metric_type {metric_type!r}; "
                    f"one of {[m.value for m in MetricType]}"
                ) from None
        rows = store.query_gold(lo, hi, team_id=team_id, metric_type=metric)
        return {"metrics": [m.to_doc() for m in rows]}

    @app.get("/volume-history/{source}")
    def volume_history(source: str):
        try:
            source_system = SourceSystem(source)
        except ValueError:
            raise NotFoundError(f"unknown source {source!r}") from None
        history = [
            {"date": day.isoformat(), "count": count}
            for day, count in store.volume_history(source_system)
        ]
        return {"source": source_system.value, "history": history}

    if sim_mode:

        @app.post("/clock/advance")
        def advance_clock(payload: Optional[dict] = None):
            body = payload or {}
            clock = runtime.clock
            assert isinstance(clock, SimClock)
            try:
                if "to" in body:
                    if not isinstance(body["to"], str):
                        raise ValueError(f"'to' must be an ISO instant, got {body['to']!r}")
                    now = clock.advance_to(ensure_utc(parse_instant(body["to"])))
                elif "minutes" in body or "hours" in body or "days" in body:
                    now = clock.advance(
                        minutes=float(body.get("minutes", 0)),
                        hours=float(body.get("hours", 0)),
                        days=float(body.get("days", 0)),
                    )
                else:
                    raise ValueError("body must carry 'to' or one of minutes/hours/days")
            except (ValueError, TypeError) as exc:
                raise ValidationError(str(exc)) from None
            return {"now": fmt_instant(now)}

    return app
