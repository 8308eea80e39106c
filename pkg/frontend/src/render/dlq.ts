import type { DlqEntryDoc } from "../types";

export interface DlqHandlers {
  onSelectRun(runId: string): void;
}

export function renderDlq(
  container: HTMLElement,
  entries: DlqEntryDoc[],
  handlers: DlqHandlers,
): void {
  container.textContent = "";
  if (entries.length === 0) {
    container.appendChild(
      Object.assign(document.createElement("p"), {
        className: "hint",
        textContent: "dead-letter queue is empty",
      }),
    );
    return;
  }
  const table = document.createElement("table");
  table.dataset.testid = "dlq-list";
  const head = document.createElement("tr");
  for (const col of ["enqueued", "run / task", "attempts", "last error"]) {
    const th = document.createElement("th");
    th.textContent = col;
    head.appendChild(th);
  }
  table.appendChild(head);

  for (const entry of entries) {
    const tr = document.createElement("tr");
    tr.dataset.runId = entry.run_id;

    const cells = [
      entry.enqueued_at,
      `${entry.run_id} / ${entry.task_id}`,
      String(entry.payload_metadata.attempts ?? "?"),
      (entry.payload_metadata.error_chain ?? []).slice(-1)[0] ?? "",
    ];
    cells.forEach((text, i) => {
      const td = document.createElement("td");
      if (i === 1) {
        const link = document.createElement("a");
        link.href = `#run=${encodeURIComponent(entry.run_id)}`;
        link.textContent = text;
        link.addEventListener("click", (ev) => {
          ev.preventDefault();
          handlers.onSelectRun(entry.run_id);
        });
        td.appendChild(link);
      } else {
        td.textContent = text;
      }
      tr.appendChild(td);
    });
    table.appendChild(tr);
  }
  container.appendChild(table);
}
