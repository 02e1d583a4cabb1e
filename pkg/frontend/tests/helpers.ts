/**
 * Test harness: a fake in-memory API served through a stubbed global
 * fetch. The fake plays the server's role faithfully for what the UI
 * depends on: rankings come back sorted for the requested group order
 * (colors never change), searches filter, list creation returns a token.
 */

import { vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { App, createApp } from "../src/main.js";

const liveApps: App[] = [];

/** Create an app bound to the shared test window; dispose via disposeApps(). */
export function mount(root: HTMLElement): App {
  const app = createApp(root, new ApiClient(""), window);
  liveApps.push(app);
  return app;
}

export function disposeApps(): void {
  for (const app of liveApps.splice(0)) app.dispose();
}

export interface FakeSite {
  site_id: number;
  url: string;
  colors: Record<string, string>;
  overall: string;
  properties: Record<string, string | null>;
}

const COLOR_RANK: Record<string, number> = { green: 0, yellow: 1, neutral: 2, red: 3 };
const GROUPS = ["NoTrack", "Attacks", "EncWeb", "EncMail"];

export const FAKE_SITES: FakeSite[] = [
  {
    site_id: 1, url: "https://alpha.test/", properties: {},
    colors: { NoTrack: "green", Attacks: "yellow", EncWeb: "green", EncMail: "green" },
    overall: "yellow",
  },
  {
    site_id: 2, url: "https://beta.test/", properties: {},
    colors: { NoTrack: "green", Attacks: "green", EncWeb: "red", EncMail: "green" },
    overall: "red",
  },
  {
    site_id: 3, url: "https://gamma.test/", properties: {},
    colors: { NoTrack: "yellow", Attacks: "green", EncWeb: "green", EncMail: "neutral" },
    overall: "yellow",
  },
];

export const FAKE_LISTS = [
  {
    id: 1, title: "German banks", description: "bank home pages",
    tags: ["banks", "de"], private: false, rescan_enabled: true,
    honor_robots: false, property_schema: [], created_at: 1700000000,
    site_count: FAKE_SITES.length,
  },
  {
    id: 2, title: "Swedish schools", description: "public school sites",
    tags: ["schools", "se"], private: false, rescan_enabled: true,
    honor_robots: true, property_schema: [], created_at: 1700000001,
    site_count: 1,
  },
];

function serverRank(order: string[]): FakeSite[] {
  return [...FAKE_SITES].sort((a, b) => {
    for (const group of order) {
      const diff = COLOR_RANK[a.colors[group]] - COLOR_RANK[b.colors[group]];
      if (diff !== 0) return diff;
    }
    return a.url < b.url ? -1 : a.url > b.url ? 1 : 0;
  });
}

export interface FakeApiState {
  requests: string[];
  createdBodies: unknown[];
  siteStatuses: string[];  // consumed per /results poll, last repeats
  token: string;
}

export function installFakeApi(): FakeApiState {
  const state: FakeApiState = {
    requests: [],
    createdBodies: [],
    siteStatuses: ["done"],
    token: "tok_" + "x".repeat(39),
  };

  const json = (body: unknown, status = 200) =>
    new Response(JSON.stringify(body), {
      status, headers: { "Content-Type": "application/json" },
    });

  vi.stubGlobal("fetch", vi.fn(async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    state.requests.push(url);
    const [path, query = ""] = url.split("?");
    const params = new URLSearchParams(query);

    if (path === "/api/v1/lists" && (!init || !init.method || init.method === "GET")) {
      const q = params.get("q")?.toLowerCase();
      const tag = params.get("tag");
      const lists = FAKE_LISTS.filter((l) =>
        (!q || (l.title + "\n" + l.description).toLowerCase().includes(q)) &&
        (!tag || l.tags.includes(tag)));
      return json({ lists, total: lists.length, limit: 50, offset: 0 });
    }
    if (path === "/api/v1/lists" && init?.method === "POST") {
      const body = JSON.parse(String(init.body));
      state.createdBodies.push(body);
      if (!body.title) return json({ error: "title required" }, 400);
      const sites = body.csv ? body.csv.split("\n").length - 1 : (body.sites ?? []).length;
      if (sites <= 0) return json({ error: "a site list needs at least one site" }, 422);
      if (JSON.stringify(body).includes("ht!tp")) {
        return json({ error: "unparseable URL" }, 400);
      }
      return json({ list_id: 99, token: state.token }, 201);
    }
    const listMatch = path.match(/^\/api\/v1\/lists\/(\d+)$/);
    if (listMatch) {
      const list = FAKE_LISTS.find((l) => l.id === Number(listMatch[1]));
      if (!list) return json({ error: "unknown list" }, 404);
      return json({
        ...list,
        sites: FAKE_SITES.map((s) => ({
          site_id: s.site_id, url: s.url, final_url: s.url, properties: s.properties,
        })),
      });
    }
    const rankMatch = path.match(/^\/api\/v1\/lists\/(\d+)\/ranking$/);
    if (rankMatch) {
      const order = params.get("order")?.split(",") ?? GROUPS;
      const ordered = serverRank(order);
      return json({
        list_id: Number(rankMatch[1]),
        order,
        rows: ordered.map((s) => ({
          site_id: s.site_id, url: s.url, final_url: s.url,
          properties: s.properties, run_id: s.site_id, finished_at: 1700001000,
          colors: s.colors, overall: s.overall, scanned: true,
        })),
        stats: {},
      });
    }
    const siteMatch = path.match(/^\/api\/v1\/sites\/(\d+)\/results$/);
    if (siteMatch) {
      const status = state.siteStatuses.length > 1
        ? state.siteStatuses.shift()! : state.siteStatuses[0];
      return json({
        site_id: Number(siteMatch[1]),
        url: "https://alpha.test/",
        final_url: "https://alpha.test/",
        properties: {},
        list_id: 1,
        blacklisted: false,
        history: [{ id: 7, started_at: 1700000500, finished_at: 1700000600, status }],
        run: status === "done"
          ? { id: 7, started_at: 1700000500, finished_at: 1700000600, status }
          : null,
        check_results: status === "done" ? [
          { check_id: "third_party_trackers", group: "NoTrack", outcome: "pass",
            critical: true, evidence: "no known trackers among 2 third-party hosts",
            doc: "No embedded third party matches the filter list." },
          { check_id: "hsts", group: "EncWeb", outcome: "fail", critical: false,
            evidence: "no Strict-Transport-Security header", doc: "HSTS is sent." },
          { check_id: "mail_starttls", group: "EncMail", outcome: "neutral",
            critical: true, evidence: "no MX record: domain receives no mail",
            doc: "The primary mail server offers STARTTLS." },
          { check_id: "mail_cert_valid", group: "EncMail", outcome: "neutral",
            critical: false, evidence: "no MX record: domain receives no mail",
            doc: "The mail certificate is valid." },
        ] : [],
        facts: null,
      });
    }
    return json({ error: `no fake route for ${url}` }, 404);
  }));
  return state;
}

export function makeRoot(): HTMLElement {
  document.body.innerHTML = "";
  window.location.hash = "";
  window.__sitegaugeTest = true;
  const root = document.createElement("main");
  root.id = "app";
  document.body.append(root);
  return root;
}

export async function waitFor(check: () => boolean, tries = 50): Promise<void> {
  for (let i = 0; i < tries; i++) {
    if (check()) return;
    await new Promise((resolve) => setTimeout(resolve, 5));
  }
  throw new Error("condition not reached");
}

export function rowUrls(root: HTMLElement): string[] {
  return [...root.querySelectorAll("table.ranking tbody tr td.site-col a")]
    .map((a) => a.textContent ?? "");
}

export function cellColors(root: HTMLElement): Map<string, string[]> {
  const out = new Map<string, string[]>();
  for (const tr of root.querySelectorAll("table.ranking tbody tr")) {
    const url = tr.querySelector("td.site-col a")?.textContent ?? "";
    const colors = [...tr.querySelectorAll("td.cell")]
      .map((td) => td.getAttribute("data-color") ?? "");
    out.set(url, colors.slice(0, -1));  // drop the overall column
  }
  return out;
}
