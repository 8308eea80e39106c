import type { RunDoc } from "../types";

export interface RunListHandlers {
  onSelectRun(runId: string): void;
}

/** Run history table, newest logical date first. */
export function renderRunList(
  container: HTMLElement,
  runs: RunDoc[],
  selectedRunId: string | null,
  handlers: RunListHandlers,
): void {
  container.textContent = "";
  if (runs.length === 0) {
    container.appendChild(
      Object.assign(document.createElement("p"), {
        className: "hint",
        textContent: "no runs yet; trigger one or start a backfill",
      }),
    );
    return;
  }
  const table = document.createElement("table");
  table.dataset.testid = "run-list";
  const head = document.createElement("tr");
  for (const col of ["logical date", "state", "tasks ok", "trigger", "mode"]) {
    const th = document.createElement("th");
    th.textContent = col;
    head.appendChild(th);
  }
  table.appendChild(head);

  const ordered = [...runs].sort((a, b) => b.logical_date.localeCompare(a.logical_date));
  for (const run of ordered) {
    const tr = document.createElement("tr");
    tr.dataset.runId = run.run_id;
    tr.className = `run-row run-${run.state}` + (run.run_id === selectedRunId ? " selected" : "");
    tr.addEventListener("click", () => handlers.onSelectRun(run.run_id));

    const states = Object.values(run.task_runs).map((t) => t.state);
    const ok = states.filter((s) => s === "success").length;
    const cells = [
      run.logical_date,
      run.state,
      `${ok}/${states.length}`,
      run.triggered_by,
      run.from_silver ? "from silver" : "live",
    ];
    for (const text of cells) {
      const td = document.createElement("td");
      td.textContent = text;
      tr.appendChild(td);
    }
    table.appendChild(tr);
  }
  container.appendChild(table);
}
