from ..errors import CycleError, IllegalTransitionError, UnknownTaskError
from .backoff import compute_backoff
from .engine import Orchestrator, route_to_dlq
from .spec import (
    DagSpec,
    RetryPolicy,
    TaskKind,
    TaskSpec,
    default_dag_spec,
    validate_dag,
)
from .state import (
    CLEARABLE_TASK_STATES,
    TERMINAL_TASK_STATES,
    DagRun,
    DlqEntry,
    RunState,
    TaskRun,
    TaskState,
    run_id_for,
)
from .tasks import SensorTripped, TaskContext, run_task

__all__ = [
    "CLEARABLE_TASK_STATES",
    "CycleError",
    "DagRun",
    "DagSpec",
    "DlqEntry",
    "IllegalTransitionError",
    "Orchestrator",
    "RetryPolicy",
    "RunState",
    "SensorTripped",
    "TERMINAL_TASK_STATES",
    "TaskContext",
    "TaskKind",
    "TaskRun",
    "TaskSpec",
    "TaskState",
    "compute_backoff",
    "default_dag_spec",
    "route_to_dlq",
    "run_id_for",
    "run_task",
    "validate_dag",
]
