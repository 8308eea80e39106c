// Document shapes served by the control plane. Field names are the API
// contract; nothing here is derived client-side.

export interface TaskSpecDoc {
  task_id: string;
  kind: string;
  params: Record<string, unknown>;
}

export interface DagDoc {
  dag_id: string;
  tasks: TaskSpecDoc[];
  edges: [string, string][];
  retry_policy: { max_retries: number; base_delay_seconds: number; max_delay_seconds: number };
  schedule: string;
}

export interface TaskRunDoc {
  task_id: string;
  state: string;
  attempt: number;
  last_error: string | null;
  next_eligible_at: string | null;
  telemetry: Record<string, unknown>;
}

export interface RunDoc {
  run_id: string;
  dag_id: string;
  logical_date: string;
  state: string;
  triggered_by: string;
  from_silver: boolean;
  task_runs: Record<string, TaskRunDoc>;
  transcript: TranscriptEntry[];
  updated_at: string | null;
}

export interface TranscriptEntry {
  at: string;
  subject: string;
  from: string;
  to: string;
  note?: string;
}

export interface AlertDoc {
  alert_key: { rule_id: string; date: string; team_id: string };
  fired_at: string;
  triggering_token: number | null;
  value: number;
  kind: string;
  message: string;
  metric_type: string;
}

export interface DlqEntryDoc {
  run_id: string;
  task_id: string;
  logical_date: string;
  payload_metadata: {
    task_kind?: string;
    params?: Record<string, unknown>;
    attempts?: number;
    error_chain?: string[];
  };
  enqueued_at: string;
}

export interface GoldMetricDoc {
  date: string;
  team_id: string;
  metric_type: string;
  value: number;
  computed_at: string;
  execution_id: string;
  unit: string;
  schema_version: number;
}

export interface HealthDoc {
  status: string;
  now: string;
  sim_mode: boolean;
  api_version: string;
}

export const TERMINAL_RUN_STATES = ["success", "failed", "halted_by_sensor"] as const;

// Task states the API will accept a clear for.
export const CLEARABLE_TASK_STATES = ["failed", "upstream_failed", "dead_lettered"] as const;

export function isClearable(state: string): boolean {
  return (CLEARABLE_TASK_STATES as readonly string[]).includes(state);
}
