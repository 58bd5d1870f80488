/**
 * Thin typed client for the /v1 session API.
 *
 * The fetch implementation is injectable so tests can run against an
 * in-memory server. Non-2xx responses become ApiError with the server's
 * detail string; transport failures keep whatever error the fetch threw,
 * which callers treat as "network trouble, worth retrying".
 */

import type {
  ChoiceAck,
  CreateBody,
  CreateResponse,
  ParetoPayload,
  QueryPayload,
  StatePayload,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`${status}: ${detail}`);
    this.name = "ApiError";
  }
}

async function parseDetail(res: Response): Promise<string> {
  try {
    const body: unknown = await res.json();
    if (body && typeof body === "object" && "detail" in body) {
      const detail = (body as { detail: unknown }).detail;
      if (typeof detail === "string") return detail;
      return JSON.stringify(detail);
    }
  } catch {
    // fall through to the status line
  }
  return res.statusText || `HTTP ${res.status}`;
}

export class ApiClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    // default to the global fetch, bound so it keeps its expected receiver
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchFn(`${this.base}${path}`, init);
    if (!res.ok) throw new ApiError(res.status, await parseDetail(res));
    return (await res.json()) as T;
  }

  createSession(body: CreateBody): Promise<CreateResponse> {
    return this.request<CreateResponse>("/v1/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  getState(sessionId: string): Promise<StatePayload> {
    return this.request<StatePayload>(`/v1/sessions/${sessionId}/state`);
  }

  getQuery(sessionId: string): Promise<QueryPayload> {
    return this.request<QueryPayload>(`/v1/sessions/${sessionId}/query`);
  }

  getPareto(sessionId: string): Promise<ParetoPayload> {
    return this.request<ParetoPayload>(`/v1/sessions/${sessionId}/pareto`);
  }

  submitChoice(sessionId: string, querySeq: number, chosen: number[]): Promise<ChoiceAck> {
    return this.request<ChoiceAck>(`/v1/sessions/${sessionId}/choice`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ query_seq: querySeq, chosen }),
    });
  }
}
