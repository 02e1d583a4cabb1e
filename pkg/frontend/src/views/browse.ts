/** List browser: full-text search box plus tag chips over GET /lists. */

import { ApiClient, ListSummary } from "../api.js";
import { clear, el } from "../dom.js";

function browseHash(q: string, tag: string): string {
  const params = new URLSearchParams();
  if (q) params.set("q", q);
  if (tag) params.set("tag", tag);
  const query = params.toString();
  return query ? `#/lists?${query}` : "#/lists";
}

export async function renderBrowse(
  root: HTMLElement, api: ApiClient, params: URLSearchParams,
  navigate: (hash: string) => void,
): Promise<void> {
  const q = params.get("q") ?? "";
  const tag = params.get("tag") ?? "";
  const result = await api.searchLists(q || undefined, tag || undefined);

  clear(root);
  const search = el("input", {
    type: "search",
    class: "search-box",
    placeholder: "search site lists",
    value: q,
    "aria-label": "search site lists",
  });
  search.value = q;
  const form = el("form", { class: "search-form" }, search,
    el("button", { type: "submit" }, "search"));
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    navigate(browseHash(search.value.trim(), tag));
  });

  root.append(
    el("h1", {}, "site lists"),
    el("p", {},
      "Crowd-sourced privacy and security benchmarks. ",
      el("a", { href: "#/create" }, "Create a new list")),
    form,
  );

  const tags = collectTags(result.lists);
  if (tags.length || tag) {
    const chips = el("div", { class: "tag-chips" });
    if (tag) {
      chips.append(el("button", { class: "chip chip-active" }, `${tag} ✕`));
      chips.lastElementChild!.addEventListener("click", () => navigate(browseHash(q, "")));
    }
    for (const candidate of tags) {
      if (candidate === tag) continue;
      const chip = el("button", { class: "chip" }, candidate);
      chip.addEventListener("click", () => navigate(browseHash(q, candidate)));
      chips.append(chip);
    }
    root.append(chips);
  }

  if (result.lists.length === 0) {
    root.append(el("p", { class: "empty" }, "No site lists match."));
    return;
  }
  const cards = el("div", { class: "list-cards" });
  for (const list of result.lists) {
    cards.append(el("div", { class: "card" },
      el("h2", {}, el("a", { href: `#/lists/${list.id}` }, list.title)),
      el("p", {}, list.description),
      el("p", { class: "meta" },
        `${list.site_count} sites · tags: ${list.tags.join(", ") || "none"}`),
    ));
  }
  root.append(cards, el("p", { class: "meta" }, `${result.total} lists`));
}

function collectTags(lists: ListSummary[]): string[] {
  const tags = new Set<string>();
  for (const list of lists) {
    for (const tag of list.tags) tags.add(tag);
  }
  return [...tags].sort();
}
