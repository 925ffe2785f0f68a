/**
 * Typed client for the /v1 session API.
 *
 * The client carries zero grading logic: it forwards choices and renders
 * whatever the service says. Stimulus URLs are opaque tokens issued by
 * the service; nothing about quality or SNR ever reaches this side.
 */

export type SessionKind = "staircase" | "screening";
export type Choice = "first_better" | "second_better" | "not_detectable";

export interface CreatedSession {
  session_id: string;
  kind: SessionKind;
  total_trials: number | null;
  max_trials: number;
}

export interface TrialPayload {
  trial_index: number;
  stimulus_a_url: string;
  stimulus_b_url: string;
  allow_not_detectable: boolean;
}

export interface AnswerAck {
  complete: boolean;
  next_available: boolean;
}

export interface ScreeningResult {
  kind: "screening";
  verdict: "pass" | "fail";
  n_correct: number;
  n_questions: number;
  acceptance_k: number;
  proceed_to_rating: boolean;
}

export interface StaircaseResult {
  kind: "staircase";
  threshold_snr_db: number | null;
  jnd_db: number | null;
  n_reversals_used: number;
  valid: boolean;
  n_trials: number;
}

export type SessionResult = ScreeningResult | StaircaseResult;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class JndqApi {
  private readonly fetchImpl: FetchLike;

  constructor(
    readonly baseUrl: string = "",
    fetchImpl?: FetchLike,
  ) {
    this.fetchImpl = fetchImpl ?? ((input, init) => globalThis.fetch(input, init));
  }

  /** Stimulus URLs arrive base-relative; resolve them for the player. */
  absoluteUrl(path: string): string {
    return this.baseUrl + path;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(0, "network", `service unreachable: ${String(err)}`);
    }
    if (!response.ok) {
      let code = "unknown";
      let message = `HTTP ${response.status}`;
      try {
        const body = (await response.json()) as { code?: string; message?: string };
        code = body.code ?? code;
        message = body.message ?? message;
      } catch {
        /* non-JSON error body; keep the status text */
      }
      throw new ApiError(response.status, code, message);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string; version: string }> {
    return this.request("/v1/health");
  }

  createSession(
    kind: SessionKind,
    config: Record<string, unknown> = {},
  ): Promise<CreatedSession> {
    return this.request("/v1/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ kind, config }),
    });
  }

  getTrial(sessionId: string): Promise<TrialPayload> {
    return this.request(`/v1/sessions/${sessionId}/trial`);
  }

  postAnswer(sessionId: string, trialIndex: number, answer: Choice): Promise<AnswerAck> {
    return this.request(`/v1/sessions/${sessionId}/answers`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ trial_index: trialIndex, answer }),
    });
  }

  getResult(sessionId: string): Promise<SessionResult> {
    return this.request(`/v1/sessions/${sessionId}/result`);
  }
}
