/**
 * Pure HTML renderers, one per pane. Each takes plain data and returns a
 * markup string, so they can be exercised without a browser. Numbers are
 * formatted here and nowhere else.
 */

import type { DifferentialEntry, JustificationPayload, Recommendation } from "./api.js";
import { formatAmount, formatProbability, formatWeight } from "./format.js";
import {
  allFeaturesObserved,
  observedInstance,
  type Observation,
  type ViewState,
} from "./state.js";

/** Orders of magnitude a justification bar can span before it saturates. */
export const WEIGHT_BAR_SPAN = 3;

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderHeader(state: ViewState): string {
  if (state.graph === null || state.sessionId === null) {
    return `<span class="empty">No network loaded</span>`;
  }
  return (
    `<strong>${esc(state.graph.name)}</strong>` +
    ` <span class="muted">network ${esc(state.graph.network_id)},` +
    ` session ${esc(state.sessionId)}</span>`
  );
}

export function renderCategories(state: ViewState): string {
  if (state.graph === null) {
    return `<p class="empty">No network loaded</p>`;
  }
  const rows = state.graph.clusters.map((cluster, index) => {
    const selected = index === state.selectedCluster ? " selected" : "";
    const count = cluster.length === 1 ? "1 feature" : `${cluster.length} features`;
    return (
      `<button class="pick${selected}" data-action="pick-cluster" data-index="${index}">` +
      `Group ${index + 1} <span class="muted">(${count})</span></button>`
    );
  });
  return `<div class="list">${rows.join("")}</div>`;
}

export function renderFeatures(state: ViewState): string {
  if (state.graph === null) {
    return `<p class="empty">No network loaded</p>`;
  }
  const cluster = state.graph.clusters[state.selectedCluster] ?? [];
  if (cluster.length === 0) {
    return `<p class="empty">This group has no features</p>`;
  }
  const rows = cluster.map((feature) => {
    const classes = ["pick"];
    if (feature === state.selectedFeature) {
      classes.push("selected");
    }
    const instance = observedInstance(state, feature);
    if (instance !== undefined) {
      classes.push("observed");
    }
    const mark = instance === undefined ? "" : ` <span class="muted">= ${esc(instance)}</span>`;
    return (
      `<button class="${classes.join(" ")}" data-action="pick-feature"` +
      ` data-feature="${esc(feature)}">${esc(feature)}${mark}</button>`
    );
  });
  return `<div class="list">${rows.join("")}</div>`;
}

export function renderInstances(state: ViewState): string {
  const feature = state.selectedFeature;
  if (state.graph === null || feature === null) {
    return `<p class="empty">Select a feature</p>`;
  }
  const variable = state.graph.variables.find((v) => v.name === feature);
  if (variable === undefined) {
    return `<p class="empty">Select a feature</p>`;
  }
  const current = observedInstance(state, feature);
  if (current !== undefined) {
    return (
      `<p>${esc(feature)} is observed as <strong>${esc(current)}</strong></p>` +
      `<button data-action="retract" data-feature="${esc(feature)}">Retract</button>`
    );
  }
  const rows = variable.instances.map(
    (instance) =>
      `<button class="pick" data-action="observe" data-feature="${esc(feature)}"` +
      ` data-instance="${esc(instance)}">${esc(instance)}</button>`,
  );
  return `<div class="list">${rows.join("")}</div>`;
}

export function renderObserved(observations: Observation[]): string {
  if (observations.length === 0) {
    return `<p class="empty">Nothing observed yet</p>`;
  }
  const rows = observations.map(
    (o) =>
      `<li>${esc(o.feature)} = ${esc(o.instance)} ` +
      `<button data-action="retract" data-feature="${esc(o.feature)}">Retract</button></li>`,
  );
  return `<ul class="observed">${rows.join("")}</ul>`;
}

export function renderDifferential(entries: DifferentialEntry[]): string {
  if (entries.length === 0) {
    return `<p class="empty">No differential yet</p>`;
  }
  const rows = entries.map(
    (entry, index) =>
      `<tr><td class="rank">${index + 1}</td>` +
      `<td class="h">${esc(entry.hypothesis)}</td>` +
      `<td class="p">${formatProbability(entry.p)}</td></tr>`,
  );
  return `<table class="differential"><tbody>${rows.join("")}</tbody></table>`;
}

export function renderRecommendations(
  recommendations: Recommendation[] | null,
  everythingObserved: boolean,
): string {
  if (recommendations === null) {
    return `<p class="empty">Not requested yet</p>`;
  }
  if (recommendations.length === 0) {
    if (everythingObserved) {
      return `<p class="done">Every feature has been observed.</p>`;
    }
    return `<p class="empty">No remaining feature is worth its cost.</p>`;
  }
  const rows = recommendations.map(
    (r) =>
      `<tr><td><button class="pick" data-action="pick-recommended"` +
      ` data-feature="${esc(r.feature)}">${esc(r.feature)}</button></td>` +
      `<td class="p">${formatAmount(r.voc)}</td>` +
      `<td class="p">${formatAmount(r.cost)}</td>` +
      `<td class="p">${formatAmount(r.net)}</td>` +
      `<td><button data-action="justify" data-feature="${esc(r.feature)}">Why?</button></td></tr>`,
  );
  return (
    `<table class="recommendations">` +
    `<thead><tr><th>feature</th><th>voc</th><th>cost</th><th>net</th><th></th></tr></thead>` +
    `<tbody>${rows.join("")}</tbody></table>`
  );
}

function weightBar(weight: number | "inf" | "-inf"): string {
  let width: number;
  let side: string;
  if (weight === "inf" || weight === "-inf") {
    width = 100;
    side = weight === "inf" ? "pro" : "con";
  } else {
    const magnitude = Math.min(Math.abs(weight), WEIGHT_BAR_SPAN);
    width = (magnitude / WEIGHT_BAR_SPAN) * 100;
    side = weight >= 0 ? "pro" : "con";
  }
  return `<div class="bar ${side}" style="width: ${width.toFixed(1)}%"></div>`;
}

export function renderJustification(
  justification: { feature: string; payload: JustificationPayload } | null,
): string {
  if (justification === null) {
    return `<p class="empty">Pick a recommendation to justify</p>`;
  }
  const { feature, payload } = justification;
  const [top, second] = payload.top_two;
  const rows = payload.instances.map(
    (entry) =>
      `<div class="weight-row"><span class="label">${esc(entry.label)}</span>` +
      weightBar(entry.weight) +
      `<span class="value">${formatWeight(entry.weight)}</span></div>`,
  );
  return (
    `<p>${esc(feature)}: log10 likelihood ratio of ` +
    `<strong>${esc(top ?? "")}</strong> against <strong>${esc(second ?? "")}</strong>` +
    ` per instance. Bars saturate at ${WEIGHT_BAR_SPAN} orders of magnitude.</p>` +
    `<div class="weights">${rows.join("")}</div>`
  );
}

export function renderBanner(notice: string | null, canRetry: boolean): string {
  if (notice === null) {
    return "";
  }
  const retry = canRetry ? ` <button data-action="retry">Retry</button>` : "";
  return `<div class="banner">${esc(notice)}${retry}</div>`;
}

export interface Panes {
  header: string;
  categories: string;
  features: string;
  instances: string;
  observed: string;
  differential: string;
  recommendations: string;
  justification: string;
  banner: string;
}

export function renderPanes(state: ViewState, notice: string | null, canRetry: boolean): Panes {
  return {
    header: renderHeader(state),
    categories: renderCategories(state),
    features: renderFeatures(state),
    instances: renderInstances(state),
    observed: renderObserved(state.observations),
    differential: renderDifferential(state.differential),
    recommendations: renderRecommendations(state.recommendations, allFeaturesObserved(state)),
    justification: renderJustification(state.justification),
    banner: renderBanner(notice, canRetry),
  };
}
