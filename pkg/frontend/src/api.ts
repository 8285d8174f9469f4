/** Thin typed client for the advisor `/v1` API. */

import type {
  AnswerEntry,
  CreateSessionResponse,
  Estimator,
  LotteryJson,
  PortfolioPayload,
  SessionRecord,
  UtilitiesByEstimator,
} from "./types.js";

export class ApiRequestError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly details: Record<string, unknown> = {},
  ) {
    super(message);
  }
}

type FetchLike = typeof fetch;

export class AdvisorClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    const payload = text ? JSON.parse(text) : null;
    if (!response.ok) {
      const code = payload?.code ?? "http_error";
      const message = payload?.message ?? `HTTP ${response.status}`;
      throw new ApiRequestError(response.status, code, message, payload?.details ?? {});
    }
    return payload as T;
  }

  healthz(): Promise<{ status: string }> {
    return this.request("GET", "/v1/healthz");
  }

  getItems(): Promise<{ name: string; items: LotteryJson[] }> {
    return this.request("GET", "/v1/items");
  }

  createSession(method: "spq" | "random", k?: number): Promise<CreateSessionResponse> {
    return this.request("POST", "/v1/sessions", { method, ...(k === undefined ? {} : { k }) });
  }

  getSession(sessionId: string): Promise<SessionRecord> {
    return this.request("GET", `/v1/sessions/${sessionId}`);
  }

  postAnswers(sessionId: string, answers: AnswerEntry[]): Promise<{ status: string }> {
    return this.request("POST", `/v1/sessions/${sessionId}/answers`, { answers });
  }

  elicit(sessionId: string): Promise<{ utilities: UtilitiesByEstimator }> {
    return this.request("POST", `/v1/sessions/${sessionId}/elicit`, {});
  }

  recommend(
    sessionId: string,
    budget: number,
    caps: number | number[],
    estimator: Estimator,
  ): Promise<PortfolioPayload> {
    return this.request("POST", `/v1/sessions/${sessionId}/portfolio`, {
      budget,
      caps,
      estimator,
    });
  }
}
