import { layoutGraph } from "../layout";
import type { DagDoc, RunDoc } from "../types";
import { isClearable } from "../types";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface GraphHandlers {
  onClearTask(taskId: string): void;
  onSelectTask(taskId: string): void;
}

function svgEl<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string>,
): SVGElementTagNameMap[K] {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [k, v] of Object.entries(attrs)) el.setAttribute(k, v);
  return el;
}

/**
 * The DAG as a left-to-right layered graph. Node color tracks the task state
 * in the given run (or "pending" when no run is selected); tasks in a
 * clearable state grow a small "clear" affordance.
 */
export function renderGraph(
  container: HTMLElement,
  dag: DagDoc,
  run: RunDoc | null,
  handlers: GraphHandlers,
): void {
  container.textContent = "";
  const layout = layoutGraph(
    dag.tasks.map((t) => t.task_id),
    dag.edges,
  );
  const svg = svgEl("svg", {
    viewBox: `0 0 ${layout.width} ${layout.height}`,
    width: String(layout.width),
    height: String(layout.height),
    role: "img",
  });
  svg.dataset.testid = "dag-graph";

  const marker = svgEl("marker", {
    id: "arrow",
    viewBox: "0 0 8 8",
    refX: "7",
    refY: "4",
    markerWidth: "7",
    markerHeight: "7",
    orient: "auto-start-reverse",
  });
  marker.appendChild(svgEl("path", { d: "M 0 0 L 8 4 L 0 8 z", class: "edge-arrow" }));
  const defs = svgEl("defs", {});
  defs.appendChild(marker);
  svg.appendChild(defs);

  for (const [from, to] of dag.edges) {
    const a = layout.nodes.get(from)!;
    const b = layout.nodes.get(to)!;
    svg.appendChild(
      svgEl("line", {
        x1: String(a.x + layout.nodeWidth),
        y1: String(a.y + layout.nodeHeight / 2),
        x2: String(b.x - 2),
        y2: String(b.y + layout.nodeHeight / 2),
        class: "edge",
        "marker-end": "url(#arrow)",
      }),
    );
  }

  for (const task of dag.tasks) {
    const pos = layout.nodes.get(task.task_id)!;
    const taskRun = run?.task_runs[task.task_id] ?? null;
    const state = taskRun?.state ?? "pending";
    const group = svgEl("g", {
      class: `node state-${state}`,
      transform: `translate(${pos.x}, ${pos.y})`,
    });
    group.dataset.taskId = task.task_id;
    group.dataset.state = state;
    group.addEventListener("click", () => handlers.onSelectTask(task.task_id));

    group.appendChild(
      svgEl("rect", {
        width: String(layout.nodeWidth),
        height: String(layout.nodeHeight),
        rx: "6",
        class: "node-box",
      }),
    );
    const label = svgEl("text", { x: "10", y: "18", class: "node-label" });
    label.textContent = task.task_id;
    group.appendChild(label);
    const stateText = svgEl("text", { x: "10", y: "34", class: "node-state" });
    stateText.textContent = taskRun ? `${state} (attempt ${taskRun.attempt})` : state;
    group.appendChild(stateText);

    if (taskRun && isClearable(state)) {
      const clear = svgEl("g", {
        class: "clear-button",
        transform: `translate(${layout.nodeWidth - 42}, 4)`,
      });
      clear.dataset.action = "clear";
      clear.dataset.task = task.task_id;
      clear.addEventListener("click", (ev) => {
        ev.stopPropagation();
        handlers.onClearTask(task.task_id);
      });
      clear.appendChild(svgEl("rect", { width: "38", height: "16", rx: "4" }));
      const txt = svgEl("text", { x: "19", y: "12", "text-anchor": "middle" });
      txt.textContent = "clear";
      clear.appendChild(txt);
      group.appendChild(clear);
    }
    svg.appendChild(group);
  }
  container.appendChild(svg);
}

/** Free-text panel with one task's attempt count, error, and telemetry. */
export function renderTaskDetail(
  container: HTMLElement,
  run: RunDoc | null,
  taskId: string | null,
): void {
  container.textContent = "";
  if (!run || !taskId || !run.task_runs[taskId]) {
    container.appendChild(
      Object.assign(document.createElement("p"), {
        className: "hint",
        textContent: "select a task node for details",
      }),
    );
    return;
  }
  const task = run.task_runs[taskId];
  const heading = document.createElement("h3");
  heading.textContent = `${taskId}: ${task.state}`;
  container.appendChild(heading);

  const list = document.createElement("dl");
  const row = (k: string, v: string) => {
    const dt = document.createElement("dt");
    dt.textContent = k;
    const dd = document.createElement("dd");
    dd.textContent = v;
    list.append(dt, dd);
  };
  row("attempt", String(task.attempt));
  if (task.next_eligible_at) row("next eligible", task.next_eligible_at);
  if (task.last_error) row("last error", task.last_error);
  container.appendChild(list);

  if (Object.keys(task.telemetry).length > 0) {
    const pre = document.createElement("pre");
    pre.className = "telemetry";
    pre.textContent = JSON.stringify(task.telemetry, null, 2);
    container.appendChild(pre);
  }
}
