import { ApiClient, ApiError } from "./api";
import { alertKeyOf, renderAlertFeed } from "./render/alerts";
import { renderDlq } from "./render/dlq";
import { renderForms } from "./render/forms";
import { renderGraph, renderTaskDetail } from "./render/graph";
import { renderRunList } from "./render/runs";
import type { AlertDoc, DagDoc, DlqEntryDoc, RunDoc } from "./types";

/**
 * The console is a stateless projection of the API: every refresh re-reads
 * everything it shows, so reloading the page (or racing another operator)
 * can never leave the screen disagreeing with the pipeline.
 */
export class ConsoleApp {
  private dag: DagDoc | null = null;
  private runs: RunDoc[] = [];
  private alerts: AlertDoc[] = [];
  private dlq: DlqEntryDoc[] = [];
  private selectedRunId: string | null = null;
  private selectedTaskId: string | null = null;
  private lineage = new Map<string, string>();
  private refreshing = false;
  private timer: ReturnType<typeof setInterval> | null = null;

  private banner!: HTMLElement;
  private notice!: HTMLElement;
  private clockEl!: HTMLElement;
  private graphEl!: HTMLElement;
  private detailEl!: HTMLElement;
  private runsEl!: HTMLElement;
  private formsEl!: HTMLElement;
  private alertsEl!: HTMLElement;
  private dlqEl!: HTMLElement;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
  ) {
    this.buildShell();
  }

  private buildShell(): void {
    this.root.textContent = "";
    const make = (tag: string, className: string, parent: HTMLElement): HTMLElement => {
      const el = document.createElement(tag);
      el.className = className;
      parent.appendChild(el);
      return el;
    };

    this.banner = make("div", "banner hidden", this.root);
    this.banner.dataset.testid = "banner";

    const header = make("header", "topbar", this.root);
    const title = make("h1", "", header);
    title.textContent = "medallion console";
    this.clockEl = make("span", "clock", header);
    this.clockEl.dataset.testid = "clock";

    const grid = make("main", "grid", this.root);
    const left = make("section", "panel graph-panel", grid);
    make("h2", "", left).textContent = "dag";
    this.graphEl = make("div", "graph-host", left);
    this.graphEl.dataset.testid = "graph-host";
    this.detailEl = make("div", "task-detail", left);
    this.detailEl.dataset.testid = "task-detail";

    const right = make("section", "panel side-panel", grid);
    make("h2", "", right).textContent = "actions";
    this.notice = make("p", "notice", right);
    this.notice.dataset.testid = "notice";
    this.formsEl = make("div", "forms", right);
    make("h2", "", right).textContent = "runs";
    this.runsEl = make("div", "runs", right);
    this.runsEl.dataset.testid = "runs-host";

    const bottom = make("section", "panel wide-panel", this.root);
    make("h2", "", bottom).textContent = "alerts";
    this.alertsEl = make("div", "alerts", bottom);
    this.alertsEl.dataset.testid = "alerts-host";
    make("h2", "", bottom).textContent = "dead letters";
    this.dlqEl = make("div", "dlq", bottom);
    this.dlqEl.dataset.testid = "dlq-host";

    renderForms(this.formsEl, {
      onTrigger: async (logicalDate) => {
        const res = await this.api.trigger(this.requireDag().dag_id, logicalDate);
        this.showNotice(`accepted run ${res.run_id}`);
        await this.refresh();
      },
      onBackfill: async (body) => {
        const res = await this.api.backfill(this.requireDag().dag_id, body);
        this.showNotice(`accepted backfill: ${res.count} runs`);
        await this.refresh();
      },
    });
  }

  private requireDag(): DagDoc {
    if (!this.dag) throw new ApiError(0, "no dag loaded yet");
    return this.dag;
  }

  private showNotice(text: string): void {
    this.notice.textContent = text;
  }

  selectRun(runId: string): void {
    this.selectedRunId = runId;
    this.selectedTaskId = null;
    this.renderAll();
  }

  selectedRun(): RunDoc | null {
    return this.runs.find((r) => r.run_id === this.selectedRunId) ?? null;
  }

  async clearTask(taskId: string): Promise<void> {
    if (!this.selectedRunId) return;
    try {
      await this.api.clearTask(this.selectedRunId, taskId);
      this.showNotice(`cleared ${taskId}; run resumed`);
    } catch (err) {
      this.showNotice(`clear failed: ${(err as Error).message}`);
    }
    await this.refresh();
  }

  /** One full re-read of the API; all views re-render from the responses. */
  async refresh(): Promise<void> {
    if (this.refreshing) return;
    this.refreshing = true;
    try {
      const [health, dags] = await Promise.all([this.api.health(), this.api.listDags()]);
      this.dag = dags[0] ?? null;
      this.clockEl.textContent = `pipeline clock: ${health.now}`;
      if (this.dag) {
        [this.runs, this.alerts, this.dlq] = await Promise.all([
          this.api.listRuns(this.dag.dag_id),
          this.api.listAlerts(),
          this.api.listDlq(),
        ]);
      }
      await this.resolveLineage();
      if (!this.selectedRunId && this.runs.length > 0) {
        this.selectedRunId = [...this.runs]
          .sort((a, b) => a.logical_date.localeCompare(b.logical_date))
          .slice(-1)[0].run_id;
      }
      this.banner.classList.add("hidden");
      this.banner.textContent = "";
      this.renderAll();
    } catch (err) {
      const detail =
        err instanceof ApiError && err.status === 0
          ? "API unreachable, retrying"
          : `API error: ${(err as Error).message}`;
      this.banner.textContent = detail;
      this.banner.classList.remove("hidden");
    } finally {
      this.refreshing = false;
    }
  }

  /** Map each alert to the run that produced its breaching Gold record. */
  private async resolveLineage(): Promise<void> {
    for (const alert of this.alerts) {
      const key = alertKeyOf(alert);
      if (this.lineage.has(key) || !alert.metric_type) continue;
      try {
        const rows = await this.api.queryGold({
          date_from: alert.alert_key.date,
          date_to: alert.alert_key.date,
          team_id: alert.alert_key.team_id,
          metric_type: alert.metric_type,
        });
        if (rows.length > 0) this.lineage.set(key, rows[0].execution_id);
      } catch {
        // lineage is best-effort decoration; the feed stays useful without it
      }
    }
  }

  private renderAll(): void {
    const run = this.selectedRun();
    if (this.dag) {
      renderGraph(this.graphEl, this.dag, run, {
        onClearTask: (taskId) => void this.clearTask(taskId),
        onSelectTask: (taskId) => {
          this.selectedTaskId = taskId;
          renderTaskDetail(this.detailEl, this.selectedRun(), taskId);
        },
      });
    }
    renderTaskDetail(this.detailEl, run, this.selectedTaskId);
    renderRunList(this.runsEl, this.runs, this.selectedRunId, {
      onSelectRun: (runId) => this.selectRun(runId),
    });
    renderAlertFeed(this.alertsEl, this.alerts, this.lineage, {
      onSelectRun: (runId) => this.selectRun(runId),
    });
    renderDlq(this.dlqEl, this.dlq, {
      onSelectRun: (runId) => this.selectRun(runId),
    });
  }

  start(intervalMs = 1500): void {
    void this.refresh();
    this.timer = setInterval(() => void this.refresh(), intervalMs);
  }

  stop(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
  }
}
