/**
 * Typed client for the perfloop HTTP gateway.
 *
 * The UI consumes the gateway exclusively; every number rendered in a panel
 * comes verbatim from one of these response shapes.
 */

export interface ScenarioIndices {
  resp_time_s: number;
  throughput_per_s: number;
}

export interface ServiceIndices {
  utilization: number;
}

export interface Indices {
  scenarios: Record<string, ScenarioIndices>;
  services: Record<string, ServiceIndices>;
}

export interface IndicesResponse {
  iteration: number;
  indices: Indices;
}

export interface Literal {
  metric: string;
  element: string;
  value: number;
  p: number;
}

export interface Occurrence {
  kind: "BLOB" | "PAF";
  target: string;
  scenario: string;
  literals: Literal[];
  probability: number;
}

export interface AntipatternsResponse {
  occurrences: Occurrence[];
}

export interface Action {
  kind: "CLONE" | "MOVE_OPERATION";
  target: string;
  provenance?: string;
  occurrence?: string | null;
}

export interface CandidatesResponse {
  candidates: Action[];
}

export interface ScenarioPreview {
  resp_time_s: number;
  baseline_resp_time_s: number;
  delta_resp_time_s: number;
}

export interface PreviewResponse {
  action: Action;
  scenarios: Record<string, ScenarioPreview>;
  node_utilization: Record<string, number>;
  max_predicted_utilization: number;
}

export interface HistoryRecord {
  iteration: number;
  measured: Indices;
  occurrences: Occurrence[];
  action: (Action & { actions?: Action[] }) | null;
  predicted: PreviewResponse | null;
  post_action_measured: Indices | null;
}

export interface HistoryResponse {
  history: HistoryRecord[];
}

export interface ApplyResponse {
  iteration: number;
  model_version: number;
  system_generation: number;
}

export interface ModelResponse {
  version: number;
  generation: number;
  document: string;
}

export class GatewayError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class GatewayClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (body && typeof body.error === "string") detail = body.error;
      } catch {
        // non-JSON error body: keep the status text
      }
      throw new GatewayError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  health(): Promise<Response> {
    return this.fetchImpl(`${this.baseUrl}/health`);
  }

  createSession(body: object): Promise<{ session: string; iteration: number }> {
    return this.request("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  listSessions(): Promise<{ sessions: string[] }> {
    return this.request("/sessions");
  }

  indices(sessionId: string): Promise<IndicesResponse> {
    return this.request(`/sessions/${sessionId}/indices`);
  }

  antipatterns(sessionId: string): Promise<AntipatternsResponse> {
    return this.request(`/sessions/${sessionId}/antipatterns`);
  }

  candidates(sessionId: string): Promise<CandidatesResponse> {
    return this.request(`/sessions/${sessionId}/candidates`);
  }

  history(sessionId: string): Promise<HistoryResponse> {
    return this.request(`/sessions/${sessionId}/history`);
  }

  model(sessionId: string): Promise<ModelResponse> {
    return this.request(`/sessions/${sessionId}/model`);
  }

  preview(sessionId: string, action: Action): Promise<PreviewResponse> {
    return this.request(`/sessions/${sessionId}/preview`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ action }),
    });
  }

  apply(
    sessionId: string,
    action: Action,
    scope: "MODEL_ONLY" | "MODEL_AND_SYSTEM",
  ): Promise<ApplyResponse> {
    return this.request(`/sessions/${sessionId}/apply`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ action, scope }),
    });
  }
}
