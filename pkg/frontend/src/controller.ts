/**
 * Session controller: polling with stale-while-revalidate, error banner
 * state, and a single-mutation-in-flight guard (the gateway enforces the
 * same rule with 409).
 */

import { type Action, type GatewayClient, GatewayError } from "./api.js";
import {
  indicesView,
  occurrenceRows,
  previewCard,
  timeline,
  type IndicesView,
  type OccurrenceRow,
  type PreviewCard,
  type TimelineEntry,
} from "./views.js";

export interface SessionView {
  sessionId: string;
  iteration: number;
  indices: IndicesView | null;
  occurrences: OccurrenceRow[];
  candidates: Action[];
  history: TimelineEntry[];
  banner: string | null; // network / conflict notices
  sessionMissing: boolean; // 404: show the session picker
  generation: number;
  modelVersion: number;
}

export class SessionController {
  readonly view: SessionView;
  private mutationInFlight = false;
  private listeners: Array<(view: SessionView) => void> = [];
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly client: GatewayClient,
    sessionId: string,
    readonly pollIntervalMs = 2000,
  ) {
    this.view = {
      sessionId,
      iteration: 0,
      indices: null,
      occurrences: [],
      candidates: [],
      history: [],
      banner: null,
      sessionMissing: false,
      generation: 0,
      modelVersion: 0,
    };
  }

  onChange(listener: (view: SessionView) => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener(this.view);
  }

  start(): void {
    void this.refresh();
    this.timer = setInterval(() => void this.refresh(), this.pollIntervalMs);
  }

  stop(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
  }

  /** One polling round; stale panels stay visible while a fetch fails. */
  async refresh(): Promise<void> {
    try {
      const [indices, antipatterns, history, candidates, model] = await Promise.all([
        this.client.indices(this.view.sessionId),
        this.client.antipatterns(this.view.sessionId),
        this.client.history(this.view.sessionId),
        this.client.candidates(this.view.sessionId),
        this.client.model(this.view.sessionId),
      ]);
      this.view.iteration = indices.iteration;
      this.view.indices = indicesView(indices);
      this.view.occurrences = occurrenceRows(antipatterns.occurrences);
      this.view.history = timeline(history);
      this.view.candidates = candidates.candidates;
      this.view.generation = model.generation;
      this.view.modelVersion = model.version;
      this.view.banner = null;
      this.view.sessionMissing = false;
    } catch (error) {
      if (error instanceof GatewayError && error.status === 404) {
        this.view.sessionMissing = true;
        this.view.banner = `session ${this.view.sessionId} not found`;
      } else {
        // keep stale data; retry on the next tick
        this.view.banner = `gateway unreachable: ${(error as Error).message}`;
      }
    }
    this.notify();
  }

  async preview(action: Action): Promise<PreviewCard | { validationError: string }> {
    try {
      return previewCard(await this.client.preview(this.view.sessionId, action));
    } catch (error) {
      if (error instanceof GatewayError && error.status === 422) {
        return { validationError: error.message };
      }
      throw error;
    }
  }

  /**
   * Apply after UI confirmation. Exactly one mutation may be in flight;
   * both this guard and the gateway's 409 produce the same notice.
   */
  async apply(
    action: Action,
    scope: "MODEL_ONLY" | "MODEL_AND_SYSTEM",
    confirmed: boolean,
  ): Promise<boolean> {
    if (!confirmed) return false; // dialog cancelled: no request sent
    if (this.mutationInFlight) {
      this.view.banner = "another change in flight";
      this.notify();
      return false;
    }
    this.mutationInFlight = true;
    this.notify();
    try {
      await this.client.apply(this.view.sessionId, action, scope);
      await this.refresh();
      return true;
    } catch (error) {
      if (error instanceof GatewayError && error.status === 409) {
        this.view.banner = "another change in flight";
      } else if (error instanceof GatewayError && error.status === 422) {
        this.view.banner = `invalid action: ${error.message}`;
      } else {
        this.view.banner = `apply failed: ${(error as Error).message}`;
      }
      this.notify();
      return false;
    } finally {
      this.mutationInFlight = false;
    }
  }
}
