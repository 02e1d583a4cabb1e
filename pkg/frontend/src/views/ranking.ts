/**
 * Ranking table: one color cell per check group per site, rows in the
 * exact order the server returned. Dragging a group column header (or
 * using the ordered-select fallback) changes the priority order, which is
 * reflected in the URL and sent back to the server for re-sorting; cell
 * colors are a pure function of scan facts and never change with order.
 */

import { ApiClient, RankingResponse } from "../api.js";
import { clear, el } from "../dom.js";
import { rankingHash } from "../router.js";

const DEFAULT_ORDER = ["NoTrack", "Attacks", "EncWeb", "EncMail"];

export function parseOrder(params: URLSearchParams): string[] {
  const raw = params.get("order");
  if (!raw) return [...DEFAULT_ORDER];
  const groups = raw.split(",").map((g) => g.trim()).filter(Boolean);
  const valid = groups.length === 4 && [...groups].sort().join(",") ===
    [...DEFAULT_ORDER].sort().join(",");
  return valid ? groups : [...DEFAULT_ORDER];
}

function moveGroup(order: string[], from: number, to: number): string[] {
  const next = [...order];
  const [moved] = next.splice(from, 1);
  next.splice(to, 0, moved);
  return next;
}

export async function renderRanking(
  root: HTMLElement, api: ApiClient, listId: number,
  params: URLSearchParams, navigate: (hash: string) => void,
): Promise<void> {
  const order = parseOrder(params);
  const [list, ranking] = await Promise.all([
    api.getList(listId),
    api.getRanking(listId, order),
  ]);

  clear(root);
  root.append(
    el("nav", { class: "crumbs" },
      el("a", { href: "#/lists" }, "site lists"), " / ", list.title),
    el("h1", {}, list.title),
    el("p", { class: "description" }, list.description),
  );

  root.append(buildOrderControls(ranking.order, listId, navigate));
  root.append(buildTable(ranking, list.property_schema, listId, navigate));
  root.append(buildLegend());
  root.append(buildStats(ranking));
}

function buildOrderControls(order: string[], listId: number,
                            navigate: (hash: string) => void): HTMLElement {
  // Accessible fallback for drag-and-drop: one positional select per slot.
  const controls = el("div", { class: "order-controls" },
    el("span", {}, "Group priority:"));
  order.forEach((group, position) => {
    const select = el("select", {
      "aria-label": `check group at priority ${position + 1}`,
      "data-position": String(position),
    });
    for (const candidate of order) {
      const option = el("option", { value: candidate }, candidate);
      if (candidate === group) option.setAttribute("selected", "");
      select.append(option);
    }
    select.addEventListener("change", () => {
      const chosen = select.value;
      const from = order.indexOf(chosen);
      navigate(rankingHash(listId, moveGroup(order, from, position)));
    });
    controls.append(select);
  });
  return controls;
}

let draggedColumn: number | null = null;

function buildTable(ranking: RankingResponse, propertySchema: string[],
                    listId: number, navigate: (hash: string) => void): HTMLElement {
  const header = el("tr", {}, el("th", { class: "site-col" }, "site"));
  ranking.order.forEach((group, index) => {
    const th = el("th", {
      class: "group-col",
      draggable: "true",
      "data-group": group,
      "data-index": String(index),
    }, group);
    th.addEventListener("dragstart", () => {
      draggedColumn = index;
    });
    th.addEventListener("dragover", (event) => event.preventDefault());
    th.addEventListener("drop", (event) => {
      event.preventDefault();
      if (draggedColumn === null || draggedColumn === index) return;
      const next = moveGroup(ranking.order, draggedColumn, index);
      draggedColumn = null;
      navigate(rankingHash(listId, next));
    });
    header.append(th);
  });
  header.append(el("th", {}, "overall"));
  for (const prop of propertySchema) {
    header.append(el("th", { class: "prop-col" }, prop));
  }

  const body = el("tbody", {});
  for (const row of ranking.rows) {
    const tr = el("tr", { "data-site-id": String(row.site_id) },
      el("td", { class: "site-col" },
        el("a", { href: `#/sites/${row.site_id}` }, row.url)));
    for (const group of ranking.order) {
      const color = row.colors[group] ?? "unknown";
      tr.append(el("td", {
        class: `cell color-${color}`,
        "data-color": color,
        title: `${group}: ${color}`,
      }, color));
    }
    tr.append(el("td", { class: `cell color-${row.overall}`, "data-color": row.overall },
      row.overall));
    for (const prop of propertySchema) {
      tr.append(el("td", { class: "prop-col" }, row.properties[prop] ?? ""));
    }
    body.append(tr);
  }

  return el("table", { class: "ranking" }, el("thead", {}, header), body);
}

function buildLegend(): HTMLElement {
  const entries: [string, string][] = [
    ["green", "all checks of the group pass"],
    ["yellow", "some non-critical check failed"],
    ["red", "a critical check failed"],
    ["neutral", "no applicable checks (e.g. no mail server)"],
    ["unknown", "not scanned yet"],
  ];
  const legend = el("div", { class: "legend" });
  for (const [color, text] of entries) {
    legend.append(el("span", { class: `legend-entry color-${color}` }, `${color}: ${text}`));
  }
  return legend;
}

function buildStats(ranking: RankingResponse): HTMLElement {
  const parts: string[] = [];
  for (const group of ranking.order) {
    const counts = ranking.stats[group] ?? {};
    const summary = ["green", "yellow", "neutral", "red"]
      .map((color) => `${counts[color] ?? 0} ${color}`)
      .join(", ");
    parts.push(`${group}: ${summary}`);
  }
  return el("p", { class: "stats" }, parts.join(" · "));
}
