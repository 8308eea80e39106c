import type { AlertDoc } from "../types";

export interface AlertFeedHandlers {
  onSelectRun(runId: string): void;
}

export function alertKeyOf(alert: AlertDoc): string {
  const k = alert.alert_key;
  return `${k.rule_id}|${k.date}|${k.team_id}`;
}

/**
 * Live alert feed, newest first. The sink upstream already deduplicates by
 * alert key; the feed still keys its rows the same way so a replayed alert
 * can never paint twice. `lineage` maps alert keys to the run that produced
 * the breaching metric (resolved lazily by the app via the Gold store).
 */
export function renderAlertFeed(
  container: HTMLElement,
  alerts: AlertDoc[],
  lineage: Map<string, string>,
  handlers: AlertFeedHandlers,
): void {
  container.textContent = "";
  if (alerts.length === 0) {
    container.appendChild(
      Object.assign(document.createElement("p"), {
        className: "hint",
        textContent: "no alerts; all metrics within thresholds",
      }),
    );
    return;
  }
  const seen = new Set<string>();
  const list = document.createElement("ul");
  list.dataset.testid = "alert-feed";
  const ordered = [...alerts].sort((a, b) => b.fired_at.localeCompare(a.fired_at));
  for (const alert of ordered) {
    const key = alertKeyOf(alert);
    if (seen.has(key)) continue;
    seen.add(key);

    const item = document.createElement("li");
    item.className = "alert";
    item.dataset.alertKey = key;

    const title = document.createElement("strong");
    title.textContent = `${alert.alert_key.rule_id}: ${alert.value.toFixed(2)}`;
    const meta = document.createElement("span");
    meta.textContent = ` ${alert.alert_key.team_id} on ${alert.alert_key.date} (fired ${alert.fired_at})`;
    item.append(title, meta);

    const producedBy = lineage.get(key);
    if (producedBy) {
      const link = document.createElement("a");
      link.href = `#run=${encodeURIComponent(producedBy)}`;
      link.textContent = `run ${producedBy}`;
      link.className = "lineage";
      link.addEventListener("click", (ev) => {
        ev.preventDefault();
        handlers.onSelectRun(producedBy);
      });
      item.append(" ", link);
    }
    list.appendChild(item);
  }
  container.appendChild(list);
}
