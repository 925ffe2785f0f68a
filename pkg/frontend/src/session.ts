/**
 * Client-side session flow: a thin state machine over the /v1 API.
 *
 * All state derives from service responses; the client never predicts an
 * outcome (no optimistic UI) and never learns which position holds the
 * reference. Answers are for-warded once: while a submission is in
 * flight further answers are ignored, and a stale-trial rejection simply
 * refreshes the view from the service.
 */

import {
  ApiError,
  Choice,
  JndqApi,
  SessionKind,
  SessionResult,
  TrialPayload,
} from "./api.js";

export type Phase =
  | "idle"
  | "calibration"
  | "loading"
  | "trial"
  | "submitting"
  | "complete"
  | "error";

export interface ClientSessionView {
  phase: Phase;
  kind: SessionKind | null;
  sessionId: string | null;
  trialIndex: number;
  /** 4 for screening; null for a staircase, whose length is unknown. */
  totalTrials: number | null;
  maxTrials: number;
  audioUrls: { a: string; b: string } | null;
  allowNotDetectable: boolean;
  result: SessionResult | null;
  error: string | null;
}

const INITIAL: ClientSessionView = {
  phase: "idle",
  kind: null,
  sessionId: null,
  trialIndex: 0,
  totalTrials: null,
  maxTrials: 0,
  audioUrls: null,
  allowNotDetectable: true,
  result: null,
  error: null,
};

export class SessionFlow {
  private current: ClientSessionView = { ...INITIAL };
  private pendingStart: { kind: SessionKind; config: Record<string, unknown> } | null =
    null;
  onChange: ((view: ClientSessionView) => void) | null = null;

  constructor(private readonly api: JndqApi) {}

  get view(): ClientSessionView {
    return this.current;
  }

  private update(patch: Partial<ClientSessionView>): ClientSessionView {
    this.current = { ...this.current, ...patch };
    this.onChange?.(this.current);
    return this.current;
  }

  /** Create the session, then hold on the volume-calibration screen. */
  async start(
    kind: SessionKind,
    config: Record<string, unknown> = {},
  ): Promise<ClientSessionView> {
    this.pendingStart = { kind, config };
    this.current = { ...INITIAL };
    this.update({ phase: "loading" });
    try {
      const created = await this.api.createSession(kind, config);
      return this.update({
        phase: "calibration",
        kind: created.kind,
        sessionId: created.session_id,
        totalTrials: created.total_trials,
        maxTrials: created.max_trials,
      });
    } catch (err) {
      return this.fail(err);
    }
  }

  /** Retry after a network failure: re-runs the last start request. */
  async retry(): Promise<ClientSessionView> {
    if (this.current.sessionId && this.current.phase === "error") {
      return this.refresh();
    }
    if (this.pendingStart) {
      return this.start(this.pendingStart.kind, this.pendingStart.config);
    }
    return this.current;
  }

  /** Leave the calibration screen and fetch the first trial. */
  async beginTrials(): Promise<ClientSessionView> {
    if (this.current.phase !== "calibration") {
      return this.current;
    }
    return this.fetchTrial();
  }

  private async fetchTrial(): Promise<ClientSessionView> {
    const sessionId = this.current.sessionId;
    if (!sessionId) {
      return this.current;
    }
    this.update({ phase: "loading" });
    try {
      const trial = await this.api.getTrial(sessionId);
      return this.applyTrial(trial);
    } catch (err) {
      if (err instanceof ApiError && err.code === "session_complete") {
        return this.fetchResult();
      }
      return this.fail(err);
    }
  }

  private applyTrial(trial: TrialPayload): ClientSessionView {
    return this.update({
      phase: "trial",
      trialIndex: trial.trial_index,
      allowNotDetectable: trial.allow_not_detectable,
      audioUrls: {
        a: this.api.absoluteUrl(trial.stimulus_a_url),
        b: this.api.absoluteUrl(trial.stimulus_b_url),
      },
    });
  }

  private async fetchResult(): Promise<ClientSessionView> {
    const sessionId = this.current.sessionId;
    if (!sessionId) {
      return this.current;
    }
    try {
      const result = await this.api.getResult(sessionId);
      return this.update({ phase: "complete", result, audioUrls: null });
    } catch (err) {
      return this.fail(err);
    }
  }

  /**
   * Submit the answer for the current trial. Ignored unless a trial is
   * showing, so double-activation produces a single POST.
   */
  async answer(choice: Choice): Promise<ClientSessionView> {
    if (this.current.phase !== "trial" || !this.current.sessionId) {
      return this.current;
    }
    const sessionId = this.current.sessionId;
    const trialIndex = this.current.trialIndex;
    this.update({ phase: "submitting" });
    try {
      const ack = await this.api.postAnswer(sessionId, trialIndex, choice);
      if (ack.complete) {
        return this.fetchResult();
      }
      return this.fetchTrial();
    } catch (err) {
      if (err instanceof ApiError && err.code === "stale_trial") {
        // Another submission won (e.g. a second tab); resync.
        return this.fetchTrial();
      }
      if (err instanceof ApiError && err.code === "session_complete") {
        return this.fetchResult();
      }
      return this.fail(err);
    }
  }

  /** Re-derive the view from the service (used by error-screen retry). */
  async refresh(): Promise<ClientSessionView> {
    if (!this.current.sessionId) {
      return this.current;
    }
    return this.fetchTrial();
  }

  private fail(err: unknown): ClientSessionView {
    const message =
      err instanceof ApiError ? err.message : `unexpected failure: ${String(err)}`;
    return this.update({ phase: "error", error: message });
  }
}
