/**
 * New-list form. On success the one-time access token is rendered exactly
 * once, kept only in the DOM of that confirmation screen: it is never
 * stored, logged, or put into the URL, so navigating away loses it for
 * good (the server only keeps a hash).
 */

import { ApiClient, ApiError, CreateListBody } from "../api.js";
import { clear, el } from "../dom.js";

export async function renderCreate(
  root: HTMLElement, api: ApiClient, navigate: (hash: string) => void,
): Promise<void> {
  clear(root);
  const title = el("input", { type: "text", id: "title", required: true });
  const description = el("textarea", { id: "description", rows: "2" });
  const tags = el("input", { type: "text", id: "tags", placeholder: "banks, de" });
  const urls = el("textarea", {
    id: "urls", rows: "6",
    placeholder: "https://one.example\nhttps://two.example",
  });
  const csv = el("textarea", {
    id: "csv", rows: "4",
    placeholder: "url,students\nhttps://a.example,500",
  });
  const csvFile = el("input", { type: "file", id: "csv-file", accept: ".csv,text/csv" });
  csvFile.addEventListener("change", () => {
    const file = csvFile.files?.[0];
    if (!file) return;
    void file.text().then((text) => {
      csv.value = text;
      void renderCsvPreview(preview, text);
    });
  });
  csv.addEventListener("input", () => void renderCsvPreview(preview, csv.value));
  const preview = el("div", { class: "csv-preview" });

  const isPrivate = el("input", { type: "checkbox", id: "private" });
  const rescan = el("input", { type: "checkbox", id: "rescan", checked: true });
  rescan.checked = true;
  const honorRobots = el("input", { type: "checkbox", id: "honor-robots" });

  const errorBox = el("p", { class: "error", role: "alert" });
  const form = el("form", { class: "create-form" },
    el("h1", {}, "create a site list"),
    field("Title", title),
    field("Methodology / description", description),
    field("Tags (comma-separated)", tags),
    field("Site URLs (one per line)", urls),
    field("…or CSV with property columns", csv),
    field("CSV file", csvFile),
    preview,
    toggle(isPrivate, "private (hidden from browsing and export)"),
    toggle(rescan, "rescan automatically"),
    toggle(honorRobots, "honor robots.txt"),
    errorBox,
    el("button", { type: "submit" }, "create and scan"),
  );

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    errorBox.textContent = "";
    const body: CreateListBody = {
      title: title.value.trim(),
      description: description.value.trim(),
      tags: tags.value.split(",").map((t) => t.trim()).filter(Boolean),
      private: isPrivate.checked,
      rescan: rescan.checked,
      honor_robots: honorRobots.checked,
    };
    if (csv.value.trim()) {
      body.csv = csv.value;
    } else {
      body.sites = urls.value.split("\n").map((u) => u.trim()).filter(Boolean)
        .map((url) => ({ url }));
    }
    void api.createList(body).then(
      (created) => showToken(root, created.list_id, created.token, navigate),
      (error: unknown) => {
        errorBox.textContent = error instanceof ApiError
          ? `cannot create list: ${error.message}`
          : "cannot create list: network error";
      },
    );
  });

  root.append(form);
}

function field(label: string, input: HTMLElement): HTMLElement {
  return el("label", { class: "field" }, el("span", {}, label), input);
}

function toggle(input: HTMLElement, label: string): HTMLElement {
  return el("label", { class: "toggle" }, input, label);
}

async function renderCsvPreview(preview: HTMLElement, text: string): Promise<void> {
  clear(preview);
  const lines = text.split("\n").map((l) => l.trim()).filter(Boolean);
  if (lines.length < 1) return;
  const header = lines[0].split(",");
  if (header[0]?.trim().toLowerCase() !== "url") {
    preview.append(el("p", { class: "error" }, "CSV must start with a 'url' column"));
    return;
  }
  const table = el("table", { class: "preview-table" });
  table.append(el("tr", {}, ...header.map((h) => el("th", {}, h.trim()))));
  for (const line of lines.slice(1, 6)) {
    table.append(el("tr", {}, ...line.split(",").map((c) => el("td", {}, c.trim()))));
  }
  preview.append(el("p", {}, `property columns: ${header.slice(1).join(", ") || "none"}`), table);
}

function showToken(root: HTMLElement, listId: number, token: string,
                   navigate: (hash: string) => void): void {
  clear(root);
  const tokenBox = el("code", { class: "token", "data-token": "present" }, token);
  const copyButton = el("button", {}, "copy token");
  copyButton.addEventListener("click", () => {
    void navigator.clipboard?.writeText(token);
    copyButton.textContent = "copied";
  });
  const viewLink = el("a", { href: `#/lists/${listId}` }, "view the ranking");
  root.append(
    el("h1", {}, "list created"),
    el("p", {},
      "Save this access token now: it proves ownership for edits and ",
      "deletion and is shown only this once."),
    el("p", {}, tokenBox, " ", copyButton),
    el("p", {}, viewLink, " (scans are queued and appear as they finish)"),
  );
}
