/**
 * End-to-end ranking interaction: dragging a group column issues
 * GET /ranking with the permuted order and re-renders rows in the
 * server-given order with unchanged cell colors.
 */

import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { cellColors, installFakeApi, makeRoot, rowUrls, waitFor, mount, disposeApps } from "./helpers.js";

describe("ranking view", () => {
  let state: ReturnType<typeof installFakeApi>;
  let root: HTMLElement;

  afterEach(disposeApps);

  beforeEach(() => {
    state = installFakeApi();
    root = makeRoot();
  });

  function rankingRequests(): string[] {
    return state.requests
      .filter((u) => u.includes("/ranking"))
      .map((u) => decodeURIComponent(u));
  }

  it("renders rows exactly in the server-given order", async () => {
    const app = mount(root);
    await app.navigate("#/lists/1");
    // fake server's lexicographic order under the default priority:
    // beta (green first groups) < alpha (Attacks yellow) < gamma (NoTrack yellow)
    expect(rowUrls(root)).toEqual([
      "https://beta.test/", "https://alpha.test/", "https://gamma.test/"]);
  });

  it("drag reorders priority: new GET, new row order, same colors", async () => {
    const app = mount(root);
    await app.navigate("#/lists/1");
    const colorsBefore = cellColorsByUrl(root);

    const headers = [...root.querySelectorAll<HTMLElement>("th.group-col")];
    expect(headers.map((h) => h.dataset.group)).toEqual(
      ["NoTrack", "Attacks", "EncWeb", "EncMail"]);

    // drag EncWeb (index 2) onto the first position
    headers[2].dispatchEvent(new Event("dragstart", { bubbles: true }));
    headers[0].dispatchEvent(new Event("dragover", { bubbles: true, cancelable: true }));
    headers[0].dispatchEvent(new Event("drop", { bubbles: true, cancelable: true }));

    await waitFor(() => rankingRequests().some((u) =>
      u.endsWith("order=EncWeb,NoTrack,Attacks,EncMail")));
    await waitFor(() => rowUrls(root)[0] !== "https://beta.test/");

    // the URL carries the new order (reload lands on the same view)
    expect(window.location.hash).toBe("#/lists/1?order=EncWeb,NoTrack,Attacks,EncMail");

    // rows re-sorted by the server: beta is EncWeb-red, sinks to the bottom
    expect(rowUrls(root)).toEqual([
      "https://alpha.test/", "https://gamma.test/", "https://beta.test/"]);

    // cell colors per site did not change, only their column position
    const colorsAfter = cellColorsByUrl(root);
    expect(colorsAfter).toEqual(colorsBefore);

    // header columns now reflect the permuted priority
    const reordered = [...root.querySelectorAll<HTMLElement>("th.group-col")];
    expect(reordered.map((h) => h.dataset.group)).toEqual(
      ["EncWeb", "NoTrack", "Attacks", "EncMail"]);
  });

  it("ordered-select fallback changes priority without drag", async () => {
    const app = mount(root);
    await app.navigate("#/lists/1");
    const first = root.querySelector<HTMLSelectElement>(
      ".order-controls select[data-position='0']")!;
    first.value = "EncMail";
    first.dispatchEvent(new Event("change", { bubbles: true }));
    await waitFor(() => rankingRequests().some((u) =>
      u.endsWith("order=EncMail,NoTrack,Attacks,EncWeb")));
    expect(window.location.hash).toBe("#/lists/1?order=EncMail,NoTrack,Attacks,EncWeb");
  });

  it("reload with order in the URL requests that order", async () => {
    window.location.hash = "#/lists/1?order=EncMail,EncWeb,Attacks,NoTrack";
    const app = mount(root);
    await app.router.renderCurrent();
    expect(rankingRequests()[0]).toContain("order=EncMail,EncWeb,Attacks,NoTrack");
    const headers = [...root.querySelectorAll<HTMLElement>("th.group-col")];
    expect(headers.map((h) => h.dataset.group)).toEqual(
      ["EncMail", "EncWeb", "Attacks", "NoTrack"]);
  });

  function cellColorsByUrl(node: HTMLElement): Record<string, Record<string, string>> {
    const headers = [...node.querySelectorAll<HTMLElement>("th.group-col")]
      .map((h) => h.dataset.group ?? "");
    const out: Record<string, Record<string, string>> = {};
    for (const [url, colors] of cellColors(node)) {
      out[url] = Object.fromEntries(headers.map((g, i) => [g, colors[i]]));
    }
    return out;
  }
});
