/**
 * Browser entry point. Binds the controller to the page, delegates
 * clicks through data-action attributes, and keeps the session
 * reference in sessionStorage so a reload lands back in the same
 * session with the same panes.
 */

import { HttpApi } from "./api.js";
import { Controller } from "./controller.js";
import type { Panes } from "./render.js";
import type { Observation } from "./state.js";

const STORAGE_KEY = "simnet-ui-session";

interface StoredSession {
  base: string;
  networkId: string;
  sessionId: string;
  observations: Observation[];
}

function paneElements(): Record<keyof Panes, HTMLElement> {
  const byId = (id: string): HTMLElement => {
    const element = document.getElementById(id);
    if (element === null) {
      throw new Error(`missing element #${id}`);
    }
    return element;
  };
  return {
    header: byId("header"),
    categories: byId("categories"),
    features: byId("features"),
    instances: byId("instances"),
    observed: byId("observed"),
    differential: byId("differential"),
    recommendations: byId("recommendations"),
    justification: byId("justification"),
    banner: byId("banner"),
  };
}

function serviceBase(): string {
  const input = document.getElementById("service-url") as HTMLInputElement | null;
  const value = input?.value.trim();
  return value ? value.replace(/\/+$/, "") : window.location.origin;
}

function persist(controller: Controller, base: string): void {
  const { networkId, sessionId, observations } = controller.state;
  if (networkId === null || sessionId === null) {
    sessionStorage.removeItem(STORAGE_KEY);
    return;
  }
  const stored: StoredSession = { base, networkId, sessionId, observations };
  sessionStorage.setItem(STORAGE_KEY, JSON.stringify(stored));
}

function recallStored(): StoredSession | null {
  const raw = sessionStorage.getItem(STORAGE_KEY);
  if (raw === null) {
    return null;
  }
  try {
    return JSON.parse(raw) as StoredSession;
  } catch {
    return null;
  }
}

function start(): void {
  const panes = paneElements();
  const controller = new Controller(new HttpApi(serviceBase), (rendered) => {
    for (const key of Object.keys(rendered) as (keyof Panes)[]) {
      panes[key].innerHTML = rendered[key];
    }
    persist(controller, serviceBase());
  });

  document.getElementById("load")?.addEventListener("click", async () => {
    const picker = document.getElementById("bundle-file") as HTMLInputElement | null;
    const file = picker?.files?.item(0);
    if (!file) {
      panes.banner.innerHTML = `<div class="banner">Choose a bundle file first</div>`;
      return;
    }
    await controller.loadNetwork(await file.text());
  });

  document.getElementById("recommend")?.addEventListener("click", () => {
    void controller.requestRecommendations();
  });

  document.getElementById("diagnose")?.addEventListener("click", () => {
    void controller.diagnose();
  });

  document.addEventListener("click", (event) => {
    const target = (event.target as HTMLElement).closest<HTMLElement>("[data-action]");
    if (target === null) {
      return;
    }
    const feature = target.dataset.feature ?? "";
    switch (target.dataset.action) {
      case "pick-cluster":
        controller.selectCluster(Number(target.dataset.index ?? "0"));
        break;
      case "pick-feature":
        controller.selectFeature(feature);
        break;
      case "pick-recommended":
        controller.pickRecommended(feature);
        break;
      case "observe":
        void controller.observe(feature, target.dataset.instance ?? "");
        break;
      case "retract":
        void controller.retract(feature);
        break;
      case "justify":
        void controller.justify(feature);
        break;
      case "retry":
        void controller.retry();
        break;
    }
  });

  const stored = recallStored();
  if (stored !== null) {
    const input = document.getElementById("service-url") as HTMLInputElement | null;
    if (input !== null) {
      input.value = stored.base;
    }
    void controller.restore(stored.networkId, stored.sessionId, stored.observations);
  } else {
    controller.redraw();
  }
}

document.addEventListener("DOMContentLoaded", start);
