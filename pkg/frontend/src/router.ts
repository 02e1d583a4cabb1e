/**
 * Hash-based routing. Everything needed to reproduce a view (list id,
 * group order, search query) lives in the URL, so reloads and shared
 * links land on the same state.
 *
 * Routes:
 *   #/lists?q=&tag=        list browser (default)
 *   #/lists/{id}?order=    ranking table
 *   #/sites/{id}           per-site check details
 *   #/create               new-list form
 */

export interface Route {
  view: "browse" | "ranking" | "detail" | "create" | "unknown";
  listId?: number;
  siteId?: number;
  params: URLSearchParams;
}

export function parseHash(hash: string): Route {
  const raw = hash.replace(/^#/, "") || "/lists";
  const [path, query = ""] = raw.split("?");
  const params = new URLSearchParams(query);
  const parts = path.split("/").filter(Boolean);
  if (parts.length === 0 || (parts.length === 1 && parts[0] === "lists")) {
    return { view: "browse", params };
  }
  if (parts[0] === "create") {
    return { view: "create", params };
  }
  if (parts[0] === "lists" && parts.length === 2 && /^\d+$/.test(parts[1])) {
    return { view: "ranking", listId: Number(parts[1]), params };
  }
  if (parts[0] === "sites" && parts.length === 2 && /^\d+$/.test(parts[1])) {
    return { view: "detail", siteId: Number(parts[1]), params };
  }
  return { view: "unknown", params };
}

export function rankingHash(listId: number, order?: string[]): string {
  const suffix = order && order.length ? `?order=${order.join(",")}` : "";
  return `#/lists/${listId}${suffix}`;
}

export type Renderer = (route: Route) => Promise<void> | void;

export class Router {
  private lastRendered: string | null = null;
  private readonly onHashChange: () => void;

  constructor(private readonly win: Window, private readonly render: Renderer) {
    this.onHashChange = () => {
      if (win.location.hash !== this.lastRendered) {
        void this.renderCurrent();
      }
    };
    win.addEventListener("hashchange", this.onHashChange);
  }

  dispose(): void {
    this.win.removeEventListener("hashchange", this.onHashChange);
  }

  navigate(hash: string): Promise<void> | void {
    // Mark before assigning: the browser fires hashchange for the
    // assignment and we must not render the same state twice.
    this.lastRendered = hash;
    this.win.location.hash = hash;
    return this.render(parseHash(hash));
  }

  renderCurrent(): Promise<void> | void {
    this.lastRendered = this.win.location.hash;
    return this.render(parseHash(this.win.location.hash));
  }
}
