/**
 * Typed client for the sitegauge REST API (/api/v1).
 *
 * The UI is a pure API client: rankings arrive pre-sorted from the server
 * and are rendered in the given row order, never re-sorted here.
 */

export interface ListSummary {
  id: number;
  title: string;
  description: string;
  tags: string[];
  private: boolean;
  rescan_enabled: boolean;
  honor_robots: boolean;
  property_schema: string[];
  created_at: number;
  site_count: number;
}

export interface ListDetail extends ListSummary {
  sites: { site_id: number; url: string; final_url: string | null;
           properties: Record<string, string | null> }[];
}

export interface SearchResponse {
  lists: ListSummary[];
  total: number;
  limit: number;
  offset: number;
}

export interface RankingRow {
  site_id: number;
  url: string;
  final_url: string | null;
  properties: Record<string, string | null>;
  run_id: number | null;
  finished_at: number | null;
  colors: Record<string, string>;
  overall: string;
  scanned: boolean;
}

export interface RankingResponse {
  list_id: number;
  order: string[];
  rows: RankingRow[];
  stats: Record<string, Record<string, number>>;
}

export interface CheckResultOut {
  check_id: string;
  group: string;
  outcome: string;
  critical: boolean;
  evidence: string;
  doc: string;
}

export interface RunInfo {
  id: number;
  started_at: number;
  finished_at: number | null;
  status: string;
}

export interface SiteResults {
  site_id: number;
  url: string;
  final_url: string | null;
  properties: Record<string, string | null>;
  list_id: number | null;
  blacklisted: boolean;
  annotation?: string;
  history: RunInfo[];
  run: RunInfo | null;
  check_results: CheckResultOut[];
  facts: unknown;
}

export interface CreateListBody {
  title: string;
  description?: string;
  tags?: string[];
  sites?: { url: string; properties?: Record<string, string | null> }[];
  csv?: string;
  private?: boolean;
  rescan?: boolean;
  honor_robots?: boolean;
}

export interface CreatedList {
  list_id: number;
  token: string;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(private readonly base: string = "") {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(this.base + path, init);
    const body = await resp.json().catch(() => ({}));
    if (!resp.ok) {
      const message = (body as { error?: string }).error ?? `HTTP ${resp.status}`;
      throw new ApiError(resp.status, message);
    }
    return body as T;
  }

  searchLists(q?: string, tag?: string): Promise<SearchResponse> {
    const params = new URLSearchParams();
    if (q) params.set("q", q);
    if (tag) params.set("tag", tag);
    const suffix = params.toString() ? `?${params.toString()}` : "";
    return this.request(`/api/v1/lists${suffix}`);
  }

  getList(listId: number): Promise<ListDetail> {
    return this.request(`/api/v1/lists/${listId}`);
  }

  getRanking(listId: number, order?: string[]): Promise<RankingResponse> {
    const suffix = order && order.length ? `?order=${encodeURIComponent(order.join(","))}` : "";
    return this.request(`/api/v1/lists/${listId}/ranking${suffix}`);
  }

  getSiteResults(siteId: number): Promise<SiteResults> {
    return this.request(`/api/v1/sites/${siteId}/results`);
  }

  createList(body: CreateListBody): Promise<CreatedList> {
    return this.request("/api/v1/lists", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }
}
