/** Application wiring: router + views over the API client. */

import { ApiClient } from "./api.js";
import { clear, el } from "./dom.js";
import { Route, Router } from "./router.js";
import { renderBrowse } from "./views/browse.js";
import { renderCreate } from "./views/create.js";
import { DetailHandle, renderDetail } from "./views/detail.js";
import { renderRanking } from "./views/ranking.js";

export interface App {
  router: Router;
  navigate(hash: string): Promise<void>;
  dispose(): void;
}

export function createApp(root: HTMLElement, api: ApiClient,
                          win: Window = window): App {
  let detailHandle: DetailHandle | null = null;

  const render = async (route: Route): Promise<void> => {
    if (detailHandle) {
      detailHandle.stop();
      detailHandle = null;
    }
    const navigate = (hash: string) => void router.navigate(hash);
    try {
      switch (route.view) {
        case "browse":
          await renderBrowse(root, api, route.params, navigate);
          break;
        case "ranking":
          await renderRanking(root, api, route.listId!, route.params, navigate);
          break;
        case "detail":
          detailHandle = await renderDetail(root, api, route.siteId!);
          break;
        case "create":
          await renderCreate(root, api, navigate);
          break;
        default:
          clear(root);
          root.append(el("p", { class: "error" }, "Unknown page. ",
            el("a", { href: "#/lists" }, "Back to the lists.")));
      }
    } catch (error) {
      clear(root);
      const message = error instanceof Error ? error.message : String(error);
      root.append(el("p", { class: "error", role: "alert" },
        `Something went wrong: ${message} `,
        el("a", { href: "#/lists" }, "Back to the lists.")));
    }
  };

  const router = new Router(win, render);
  return {
    router,
    navigate: (hash: string) => Promise.resolve(router.navigate(hash)),
    dispose() {
      if (detailHandle) detailHandle.stop();
      router.dispose();
    },
  };
}

declare global {
  interface Window {
    __sitegaugeTest?: boolean;
  }
}

if (typeof window !== "undefined" && !window.__sitegaugeTest) {
  window.addEventListener("DOMContentLoaded", () => {
    const root = document.getElementById("app");
    if (root) {
      const app = createApp(root, new ApiClient(""));
      void app.router.renderCurrent();
    }
  });
}
