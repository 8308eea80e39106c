import type {
  AlertDoc,
  DagDoc,
  DlqEntryDoc,
  GoldMetricDoc,
  HealthDoc,
  RunDoc,
} from "./types";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

type FetchLike = typeof fetch;

/** Thin typed client; every method is one route, no caching, no retries. */
export class ApiClient {
  constructor(
    public readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    // Call as a free function: window.fetch rejects a foreign `this`.
    const doFetch = this.fetchImpl;
    let response: Response;
    try {
      response = await doFetch(`${this.baseUrl}${path}`, {
        headers: { "content-type": "application/json" },
        ...init,
      });
    } catch (err) {
      throw new ApiError(0, `API unreachable: ${(err as Error).message}`);
    }
    const body = await response.text();
    let doc: unknown = null;
    if (body) {
      try {
        doc = JSON.parse(body);
      } catch {
        doc = { detail: body };
      }
    }
    if (!response.ok) {
      const detail =
        doc && typeof doc === "object" && "detail" in doc
          ? String((doc as { detail: unknown }).detail)
          : `HTTP ${response.status}`;
      throw new ApiError(response.status, detail);
    }
    return doc as T;
  }

  health(): Promise<HealthDoc> {
    return this.request("/health");
  }

  async listDags(): Promise<DagDoc[]> {
    const doc = await this.request<{ dags: DagDoc[] }>("/dags");
    return doc.dags;
  }

  async listRuns(dagId: string): Promise<RunDoc[]> {
    const doc = await this.request<{ runs: RunDoc[] }>(
      `/dags/${encodeURIComponent(dagId)}/runs`,
    );
    return doc.runs;
  }

  getRun(runId: string): Promise<RunDoc> {
    return this.request(`/runs/${encodeURIComponent(runId)}`);
  }

  trigger(dagId: string, logicalDate: string): Promise<{ run_id: string }> {
    return this.request(`/dags/${encodeURIComponent(dagId)}/trigger`, {
      method: "POST",
      body: JSON.stringify({ logical_date: logicalDate }),
    });
  }

  backfill(
    dagId: string,
    body: { from: string; to: string; parallelism: number; from_silver: boolean },
  ): Promise<{ run_ids: string[]; count: number }> {
    return this.request(`/dags/${encodeURIComponent(dagId)}/backfill`, {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  clearTask(runId: string, taskId: string): Promise<RunDoc> {
    return this.request(
      `/runs/${encodeURIComponent(runId)}/tasks/${encodeURIComponent(taskId)}/clear`,
      { method: "POST", body: JSON.stringify({}) },
    );
  }

  async listAlerts(): Promise<AlertDoc[]> {
    const doc = await this.request<{ alerts: AlertDoc[] }>("/alerts");
    return doc.alerts;
  }

  async listDlq(): Promise<DlqEntryDoc[]> {
    const doc = await this.request<{ entries: DlqEntryDoc[] }>("/dlq");
    return doc.entries;
  }

  async queryGold(params: {
    date_from: string;
    date_to: string;
    team_id?: string;
    metric_type?: string;
  }): Promise<GoldMetricDoc[]> {
    const search = new URLSearchParams();
    search.set("date_from", params.date_from);
    search.set("date_to", params.date_to);
    if (params.team_id) search.set("team_id", params.team_id);
    if (params.metric_type) search.set("metric_type", params.metric_type);
    const doc = await this.request<{ metrics: GoldMetricDoc[] }>(`/gold?${search}`);
    return doc.metrics;
  }
}

export function resolveApiBase(search: string = window.location.search): string {
  const fromQuery = new URLSearchParams(search).get("api");
  if (fromQuery) return fromQuery.replace(/\/$/, "");
  const injected = (window as { MEDALLION_API_BASE?: string }).MEDALLION_API_BASE;
  if (injected) return injected.replace(/\/$/, "");
  return "http://127.0.0.1:8000";
}
