/**
 * View state and its transitions.
 *
 * Each transition returns a fresh state built from a confirmed service
 * response; nothing here invents or combines probabilities. Panels that
 * describe a superseded evidence set (recommendations, justification)
 * are dropped whenever the evidence changes.
 */

import type {
  DifferentialEntry,
  GraphPayload,
  JustificationPayload,
  Recommendation,
} from "./api.js";

export interface Observation {
  feature: string;
  instance: string;
}

export interface ViewState {
  networkId: string | null;
  graph: GraphPayload | null;
  sessionId: string | null;
  selectedCluster: number;
  selectedFeature: string | null;
  observations: Observation[];
  differential: DifferentialEntry[];
  recommendations: Recommendation[] | null;
  justification: { feature: string; payload: JustificationPayload } | null;
}

export function initialState(): ViewState {
  return {
    networkId: null,
    graph: null,
    sessionId: null,
    selectedCluster: 0,
    selectedFeature: null,
    observations: [],
    differential: [],
    recommendations: null,
    justification: null,
  };
}

export function withNetwork(state: ViewState, networkId: string, graph: GraphPayload): ViewState {
  return {
    ...initialState(),
    networkId,
    graph,
  };
}

export function withSession(
  state: ViewState,
  sessionId: string,
  differential: DifferentialEntry[],
): ViewState {
  return {
    ...state,
    sessionId,
    observations: [],
    differential,
    recommendations: null,
    justification: null,
  };
}

export function withClusterSelection(state: ViewState, index: number): ViewState {
  return { ...state, selectedCluster: index, selectedFeature: null };
}

export function withFeatureSelection(state: ViewState, feature: string): ViewState {
  return { ...state, selectedFeature: feature };
}

export function withObservation(
  state: ViewState,
  observation: Observation,
  differential: DifferentialEntry[],
): ViewState {
  return {
    ...state,
    observations: [...state.observations, observation],
    differential,
    recommendations: null,
    justification: null,
  };
}

export function withRetraction(
  state: ViewState,
  feature: string,
  differential: DifferentialEntry[],
): ViewState {
  return {
    ...state,
    observations: state.observations.filter((o) => o.feature !== feature),
    differential,
    recommendations: null,
    justification: null,
  };
}

export function withRecommendations(state: ViewState, recommendations: Recommendation[]): ViewState {
  return { ...state, recommendations };
}

export function withJustification(
  state: ViewState,
  feature: string,
  payload: JustificationPayload,
): ViewState {
  return { ...state, justification: { feature, payload } };
}

/** Rebuild the state a reloaded page needs from replayed responses. */
export function restoredState(
  networkId: string,
  graph: GraphPayload,
  sessionId: string,
  observations: Observation[],
  differential: DifferentialEntry[],
): ViewState {
  return {
    ...initialState(),
    networkId,
    graph,
    sessionId,
    observations: [...observations],
    differential,
  };
}

export function observedInstance(state: ViewState, feature: string): string | undefined {
  return state.observations.find((o) => o.feature === feature)?.instance;
}

export function observableFeatures(state: ViewState): string[] {
  if (state.graph === null) {
    return [];
  }
  const distinguished = state.graph.distinguished;
  return state.graph.variables.map((v) => v.name).filter((name) => name !== distinguished);
}

export function allFeaturesObserved(state: ViewState): boolean {
  const features = observableFeatures(state);
  if (features.length === 0) {
    return false;
  }
  const seen = new Set(state.observations.map((o) => o.feature));
  return features.every((name) => seen.has(name));
}

export function clusterOf(state: ViewState, feature: string): number {
  if (state.graph === null) {
    return 0;
  }
  const index = state.graph.clusters.findIndex((cluster) => cluster.includes(feature));
  return index >= 0 ? index : 0;
}

export function instancesOf(state: ViewState, feature: string): string[] {
  const variable = state.graph?.variables.find((v) => v.name === feature);
  return variable ? variable.instances : [];
}
