/**
 * Typed client for the diagnostic HTTP service.
 *
 * Every method maps to one route and returns the parsed JSON payload
 * unchanged, except that observation and retraction responses are
 * unwrapped from their {"differential": ...} envelope. The client never
 * computes probabilities; it only moves them.
 */

export interface ErrorEnvelope {
  code: string;
  message: string;
  path: string;
}

/** The service answered with a diagnostic (4xx/5xx plus envelope). */
export class ServiceRejection extends Error {
  constructor(
    readonly status: number,
    readonly envelope: ErrorEnvelope,
  ) {
    super(`${envelope.code}: ${envelope.message}`);
    this.name = "ServiceRejection";
  }
}

/** The service could not be reached at all. */
export class NetworkFailure extends Error {
  constructor(readonly reason: unknown) {
    super("the diagnostic service could not be reached");
    this.name = "NetworkFailure";
  }
}

export interface RegisterResult {
  network_id: string;
  verdict: {
    status: string;
    witness?: string;
    repairs?: { edge: string[]; arc: string[] }[];
  };
  warnings: string[];
}

export interface VariablePayload {
  name: string;
  instances: string[];
}

export interface GraphPayload {
  network_id: string;
  name: string;
  distinguished: string;
  hypotheses: string[];
  variables: VariablePayload[];
  arcs: string[][];
  similarity_edges: string[][];
  clusters: string[][];
}

export interface SessionRef {
  session_id: string;
  network_id: string;
}

export interface DifferentialEntry {
  hypothesis: string;
  p: number;
}

export interface DifferentialPayload {
  posterior: DifferentialEntry[];
}

export interface Recommendation {
  feature: string;
  voc: number;
  cost: number;
  net: number;
}

export type Weight = number | "inf" | "-inf";

export interface JustificationPayload {
  top_two: string[];
  instances: { label: string; weight: Weight }[];
}

export interface DiagnosisPayload {
  diagnosis: string;
  expected_utility: number | null;
}

export interface Api {
  registerNetwork(documentText: string): Promise<RegisterResult>;
  graph(networkId: string): Promise<GraphPayload>;
  openSession(networkId: string): Promise<SessionRef>;
  observe(sessionId: string, feature: string, instance: string): Promise<DifferentialPayload>;
  retract(sessionId: string, feature: string): Promise<DifferentialPayload>;
  differential(sessionId: string): Promise<DifferentialPayload>;
  recommendations(sessionId: string, limit?: number): Promise<Recommendation[]>;
  justification(sessionId: string, feature: string): Promise<JustificationPayload>;
  diagnose(sessionId: string): Promise<DiagnosisPayload>;
}

/** Ranked features shown when the caller does not ask for more. */
export const DEFAULT_RECOMMENDATION_LIMIT = 4;

export class HttpApi implements Api {
  /** The base may be a thunk so a page can repoint the service field. */
  constructor(readonly base: string | (() => string)) {}

  private origin(): string {
    return typeof this.base === "function" ? this.base() : this.base;
  }

  private async send<T>(method: string, path: string, body?: string): Promise<T> {
    let response: Response;
    try {
      response = await fetch(this.origin() + path, {
        method,
        headers: body === undefined ? undefined : { "content-type": "application/json" },
        body,
      });
    } catch (reason) {
      throw new NetworkFailure(reason);
    }
    const text = await response.text();
    let payload: unknown = null;
    if (text !== "") {
      try {
        payload = JSON.parse(text);
      } catch (reason) {
        throw new NetworkFailure(reason);
      }
    }
    if (!response.ok) {
      throw new ServiceRejection(response.status, payload as ErrorEnvelope);
    }
    return payload as T;
  }

  registerNetwork(documentText: string): Promise<RegisterResult> {
    return this.send("POST", "/networks", documentText);
  }

  graph(networkId: string): Promise<GraphPayload> {
    return this.send("GET", `/networks/${encodeURIComponent(networkId)}/graph`);
  }

  openSession(networkId: string): Promise<SessionRef> {
    return this.send("POST", `/networks/${encodeURIComponent(networkId)}/sessions`, "{}");
  }

  async observe(sessionId: string, feature: string, instance: string): Promise<DifferentialPayload> {
    const wrapped = await this.send<{ differential: DifferentialPayload }>(
      "POST",
      `/sessions/${encodeURIComponent(sessionId)}/observations`,
      JSON.stringify({ feature, instance }),
    );
    return wrapped.differential;
  }

  async retract(sessionId: string, feature: string): Promise<DifferentialPayload> {
    const wrapped = await this.send<{ differential: DifferentialPayload }>(
      "DELETE",
      `/sessions/${encodeURIComponent(sessionId)}/observations/${encodeURIComponent(feature)}`,
    );
    return wrapped.differential;
  }

  differential(sessionId: string): Promise<DifferentialPayload> {
    return this.send("GET", `/sessions/${encodeURIComponent(sessionId)}/differential`);
  }

  recommendations(
    sessionId: string,
    limit: number = DEFAULT_RECOMMENDATION_LIMIT,
  ): Promise<Recommendation[]> {
    return this.send(
      "GET",
      `/sessions/${encodeURIComponent(sessionId)}/recommendations?limit=${limit}`,
    );
  }

  justification(sessionId: string, feature: string): Promise<JustificationPayload> {
    return this.send(
      "GET",
      `/sessions/${encodeURIComponent(sessionId)}/justification?feature=${encodeURIComponent(feature)}`,
    );
  }

  diagnose(sessionId: string): Promise<DiagnosisPayload> {
    return this.send("POST", `/sessions/${encodeURIComponent(sessionId)}/diagnose`, "{}");
  }
}
