/**
 * Wires the API client to the view state and hands rendered panes to a
 * presenter callback. State changes only after a response has arrived,
 * so a failed call leaves every pane exactly as it was. When the
 * service itself rejects a request the diagnostic is shown; when the
 * service is unreachable the same action is kept for a retry button.
 */

import { NetworkFailure, ServiceRejection, type Api } from "./api.js";
import { renderPanes, type Panes } from "./render.js";
import {
  clusterOf,
  initialState,
  restoredState,
  withClusterSelection,
  withFeatureSelection,
  withJustification,
  withNetwork,
  withObservation,
  withRecommendations,
  withRetraction,
  withSession,
  type Observation,
  type ViewState,
} from "./state.js";
import { formatAmount } from "./format.js";

export type Presenter = (panes: Panes) => void;

export class Controller {
  state: ViewState = initialState();
  notice: string | null = null;
  private retryAction: (() => Promise<void>) | null = null;
  private pendingNotice: string | null = null;

  constructor(
    private readonly api: Api,
    private readonly present: Presenter,
  ) {}

  redraw(): void {
    this.present(renderPanes(this.state, this.notice, this.retryAction !== null));
  }

  private async guarded(action: () => Promise<void>): Promise<void> {
    try {
      await action();
      this.notice = this.pendingNotice;
      this.pendingNotice = null;
      this.retryAction = null;
    } catch (failure) {
      this.pendingNotice = null;
      if (failure instanceof ServiceRejection) {
        this.notice = `${failure.envelope.code}: ${failure.envelope.message}`;
        this.retryAction = null;
      } else if (failure instanceof NetworkFailure) {
        this.notice = `${failure.message}; retry when it is back`;
        this.retryAction = action;
      } else {
        throw failure;
      }
    }
    this.redraw();
  }

  async loadNetwork(documentText: string): Promise<void> {
    await this.guarded(async () => {
      const registered = await this.api.registerNetwork(documentText);
      if (registered.verdict.status !== "consistent") {
        const witness = registered.verdict.witness ?? "no witness reported";
        throw new ServiceRejection(409, {
          code: "inconsistent_model",
          message: witness,
          path: "/networks",
        });
      }
      const graph = await this.api.graph(registered.network_id);
      const session = await this.api.openSession(registered.network_id);
      const differential = await this.api.differential(session.session_id);
      this.state = withSession(
        withNetwork(this.state, registered.network_id, graph),
        session.session_id,
        differential.posterior,
      );
    });
  }

  /** Rebuild panes for an existing session after a page reload. */
  async restore(networkId: string, sessionId: string, observations: Observation[]): Promise<void> {
    await this.guarded(async () => {
      const graph = await this.api.graph(networkId);
      const differential = await this.api.differential(sessionId);
      this.state = restoredState(networkId, graph, sessionId, observations, differential.posterior);
    });
  }

  selectCluster(index: number): void {
    this.state = withClusterSelection(this.state, index);
    this.redraw();
  }

  selectFeature(feature: string): void {
    this.state = withFeatureSelection(
      withClusterSelection(this.state, clusterOf(this.state, feature)),
      feature,
    );
    this.redraw();
  }

  async observe(feature: string, instance: string): Promise<void> {
    const sessionId = this.requireSession();
    await this.guarded(async () => {
      const differential = await this.api.observe(sessionId, feature, instance);
      this.state = withObservation(this.state, { feature, instance }, differential.posterior);
    });
  }

  async retract(feature: string): Promise<void> {
    const sessionId = this.requireSession();
    await this.guarded(async () => {
      const differential = await this.api.retract(sessionId, feature);
      this.state = withRetraction(this.state, feature, differential.posterior);
    });
  }

  async requestRecommendations(): Promise<void> {
    const sessionId = this.requireSession();
    await this.guarded(async () => {
      const recommendations = await this.api.recommendations(sessionId);
      this.state = withRecommendations(this.state, recommendations);
    });
  }

  /** A recommended feature opens its instance picker without any request. */
  pickRecommended(feature: string): void {
    this.selectFeature(feature);
  }

  async justify(feature: string): Promise<void> {
    const sessionId = this.requireSession();
    await this.guarded(async () => {
      const payload = await this.api.justification(sessionId, feature);
      this.state = withJustification(this.state, feature, payload);
    });
  }

  async diagnose(): Promise<void> {
    const sessionId = this.requireSession();
    await this.guarded(async () => {
      const { diagnosis, expected_utility } = await this.api.diagnose(sessionId);
      this.pendingNotice =
        expected_utility === null
          ? `diagnosis ${diagnosis}`
          : `diagnosis ${diagnosis} (expected utility ${formatAmount(expected_utility)})`;
    });
  }

  async retry(): Promise<void> {
    const action = this.retryAction;
    if (action === null) {
      return;
    }
    this.retryAction = null;
    await this.guarded(action);
  }

  private requireSession(): string {
    if (this.state.sessionId === null) {
      throw new Error("no session is open");
    }
    return this.state.sessionId;
  }
}
