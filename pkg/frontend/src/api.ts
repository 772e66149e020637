// Typed client for the session service. Shapes mirror the JSON the
// service emits; nothing here reinterprets values.

export interface SessionInfo {
  session_id: string;
  status: string;
  round: number;
  steps: number;
  n_rows: number;
  labeled_count: number;
  regions: string[];
}

export interface FeatureCell {
  name: string;
  value: number | string;
  display: string;
}

export interface ConstraintWeight {
  text: string;
  feature: number;
  weight: number;
}

export interface NextAwaiting {
  status: "awaiting_label";
  round: number;
  query_id: string;
  index: number;
  features: FeatureCell[];
  certainty: number;
  explanation: {
    constraints: ConstraintWeight[];
    intercept: number;
    r2: number;
  };
  region_text: string;
  batch?: { size: number; summary: string };
}

export interface NextDone {
  status: "done";
  round: number;
  labeled_count: number;
}

export type NextPayload = NextAwaiting | NextDone;

export interface LabelResult {
  status: string;
  outcome: string;
  round: number;
  labeled_count: number;
  done: boolean;
}

export interface HistoryRound {
  round: number;
  bias: Record<string, number | null>;
  count: Record<string, number>;
}

export interface HistoryPayload {
  regions: string[];
  rounds: HistoryRound[];
}

export interface ClusterEntry {
  id: number;
  size: number;
  label: string[];
  top_constraints: { text: string; value: number }[];
}

export interface ClusterReport {
  k: number;
  agreement: number;
  clusters: ClusterEntry[];
  round?: number;
}

/** 409: the query id no longer matches the pending query. */
export class StaleQueryError extends Error {}

/** Any non-conflict HTTP failure, with the status attached. */
export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

/** What the controller needs from the service; Api is the real one. */
export interface ApiClient {
  createSession(body: { preset?: string; config?: unknown; seed?: number }): Promise<SessionInfo>;
  next(sessionId: string): Promise<NextPayload>;
  label(sessionId: string, queryId: string, label: 0 | 1): Promise<LabelResult>;
  skip(sessionId: string, queryId: string): Promise<LabelResult>;
  history(sessionId: string): Promise<HistoryPayload>;
  clusters(sessionId: string): Promise<ClusterReport>;
}

type FetchLike = typeof fetch;

export class Api implements ApiClient {
  constructor(
    private readonly base: string,
    // wrapped so the browser's fetch keeps its own this binding
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.base}${path}`, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (response.status === 409) {
      const detail = await response.text();
      throw new StaleQueryError(detail);
    }
    if (!response.ok) {
      throw new ApiError(response.status, await response.text());
    }
    return (await response.json()) as T;
  }

  createSession(body: { preset?: string; config?: unknown; seed?: number }): Promise<SessionInfo> {
    return this.request("POST", "/sessions", body);
  }

  next(sessionId: string): Promise<NextPayload> {
    return this.request("GET", `/sessions/${sessionId}/next`);
  }

  label(sessionId: string, queryId: string, label: 0 | 1): Promise<LabelResult> {
    return this.request("POST", `/sessions/${sessionId}/label`, {
      query_id: queryId,
      label,
    });
  }

  skip(sessionId: string, queryId: string): Promise<LabelResult> {
    return this.request("POST", `/sessions/${sessionId}/label`, {
      query_id: queryId,
      skip: true,
    });
  }

  history(sessionId: string): Promise<HistoryPayload> {
    return this.request("GET", `/sessions/${sessionId}/history`);
  }

  clusters(sessionId: string): Promise<ClusterReport> {
    return this.request("GET", `/sessions/${sessionId}/clusters`);
  }
}
