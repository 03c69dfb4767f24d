/**
 * Typed client for the review-service REST endpoints.
 */

export interface ReviewItem {
  item_id: string;
  pair_id: string;
  candidate: string;
  source_question: string;
  answer: string;
  position: number;
  total: number;
}

export interface SessionStats {
  session_id: string;
  total: number;
  marked: number;
  accepted: number;
  rejected: number;
  acceptance_ratio: number | null;
  remaining: number;
}

export interface SessionInfo {
  session_id: string;
  run_id: string;
  reviewer_id: string;
  seed: number;
  total: number;
  created_at: string;
}

export type Verdict = "accept" | "reject";

export type NextResult =
  | { done: false; item: ReviewItem }
  | { done: true; stats: SessionStats };

export class ApiError extends Error {
  constructor(message: string, readonly status?: number) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ReviewApi {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    // Bind through globalThis so browser fetch keeps its window receiver.
    this.fetchFn = fetchFn ?? ((url, init) => globalThis.fetch(url, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new ApiError(`service unreachable: ${String(err)}`);
    }
    let payload: unknown = null;
    try {
      payload = await response.json();
    } catch {
      // non-JSON body; fall through to the status check
    }
    if (!response.ok) {
      const detail =
        payload && typeof payload === "object" && "detail" in payload
          ? String((payload as { detail: unknown }).detail)
          : response.statusText;
      throw new ApiError(`${response.status}: ${detail}`, response.status);
    }
    return payload as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("/healthz");
  }

  createSession(runId: string, reviewerId: string, seed: number): Promise<SessionInfo> {
    return this.request("/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ run_id: runId, reviewer_id: reviewerId, seed }),
    });
  }

  async nextItem(sessionId: string): Promise<NextResult> {
    const payload = await this.request<Record<string, unknown>>(
      `/sessions/${encodeURIComponent(sessionId)}/next`,
    );
    if (payload["done"] === true) {
      return { done: true, stats: payload["stats"] as SessionStats };
    }
    return { done: false, item: payload as unknown as ReviewItem };
  }

  submitMark(
    sessionId: string,
    itemId: string,
    verdict: Verdict,
    note?: string,
  ): Promise<SessionStats> {
    return this.request(`/sessions/${encodeURIComponent(sessionId)}/marks`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ item_id: itemId, verdict, note: note || null }),
    });
  }

  stats(sessionId: string): Promise<SessionStats> {
    return this.request(`/sessions/${encodeURIComponent(sessionId)}/stats`);
  }
}
