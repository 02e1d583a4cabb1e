/**
 * Per-site check details: outcome icon, evidence, and documentation per
 * check, grouped under its check group; run-history timestamps below.
 * While a scan is queued or running the view polls every 5 seconds.
 */

import { ApiClient, CheckResultOut, SiteResults } from "../api.js";
import { clear, el } from "../dom.js";

const GROUPS = ["NoTrack", "Attacks", "EncWeb", "EncMail"];
const OUTCOME_ICONS: Record<string, string> = {
  pass: "✓", fail: "✗", neutral: "○", error: "!",
};
export const POLL_INTERVAL_MS = 5000;

export interface DetailHandle {
  stop(): void;
}

export async function renderDetail(
  root: HTMLElement, api: ApiClient, siteId: number,
): Promise<DetailHandle> {
  let timer: ReturnType<typeof setTimeout> | null = null;
  let stopped = false;

  const draw = async (): Promise<void> => {
    const results = await api.getSiteResults(siteId);
    if (stopped) return;
    render(root, results);
    const status = newestStatus(results);
    if (status === "queued" || status === "running") {
      timer = setTimeout(() => void draw(), POLL_INTERVAL_MS);
    }
  };
  await draw();
  return {
    stop() {
      stopped = true;
      if (timer !== null) clearTimeout(timer);
    },
  };
}

function newestStatus(results: SiteResults): string | null {
  const last = results.history[results.history.length - 1];
  return last ? last.status : null;
}

function render(root: HTMLElement, results: SiteResults): void {
  clear(root);
  root.append(
    el("nav", { class: "crumbs" },
      el("a", { href: "#/lists" }, "site lists"),
      results.list_id !== null
        ? el("a", { href: `#/lists/${results.list_id}` }, " / ranking")
        : ""),
    el("h1", {}, results.url),
  );
  if (results.final_url && results.final_url !== results.url) {
    root.append(el("p", { class: "meta" }, `resolves to ${results.final_url}`));
  }
  if (results.blacklisted) {
    root.append(el("p", { class: "annotation", role: "note" },
      results.annotation ?? "The site operator has opted out of scanning."));
  }
  const status = newestStatus(results);
  if (status === "queued" || status === "running") {
    root.append(el("p", { class: "scanning", "data-polling": "true" },
      "scan in progress, updating automatically…"));
  }
  if (!results.run) {
    root.append(el("p", { class: "empty" }, "No completed scan yet."));
    return;
  }

  for (const group of GROUPS) {
    const rows = results.check_results.filter((r) => r.group === group);
    if (!rows.length) continue;
    const section = el("section", { class: "check-group", "data-group": group },
      el("h2", {}, group), ...(group === "EncMail" && rows.every((r) => r.outcome === "neutral")
        ? [el("p", { class: "meta" }, "neutral: the domain has no mail server (no MX record)")]
        : []));
    const table = el("table", { class: "checks" });
    for (const check of rows) {
      table.append(renderCheckRow(check));
    }
    section.append(table);
    root.append(section);
  }

  const history = el("ul", { class: "history" });
  for (const run of results.history) {
    const when = new Date(run.started_at * 1000).toISOString();
    history.append(el("li", {}, `${when} — ${run.status}`));
  }
  root.append(el("section", {},
    el("h2", {}, "scan history"), history));
}

function renderCheckRow(check: CheckResultOut): HTMLElement {
  const icon = OUTCOME_ICONS[check.outcome] ?? "?";
  return el("tr", { class: `outcome-${check.outcome}`, "data-check": check.check_id },
    el("td", { class: "icon", title: check.outcome }, icon),
    el("td", { class: "check-id" },
      check.check_id, check.critical ? el("span", { class: "critical" }, " critical") : ""),
    el("td", { class: "evidence" }, check.evidence),
    el("td", { class: "doc" }, check.doc),
  );
}
