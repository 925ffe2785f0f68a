/**
 * DOM rendering for the listening-test flow.
 *
 * One active session per page. The choice buttons stay disabled until
 * both clips have played through once (enforced by PairPlayer state, not
 * by CSS), every control is a real <button> so the whole flow is
 * keyboard-operable, and 1/2/0 or A/B/N work as shortcuts.
 */

import { Choice } from "./api.js";
import { PairPlayer, Slot } from "./player.js";
import { ClientSessionView, SessionFlow } from "./session.js";

export interface CalibrationTone {
  play(): Promise<void> | void;
  stop(): void;
}

const CHOICE_LABELS: Record<string, Choice> = {
  "choose-a": "first_better",
  "choose-b": "second_better",
  "choose-nd": "not_detectable",
};

const KEY_TO_BUTTON: Record<string, string> = {
  "1": "choose-a",
  a: "choose-a",
  "2": "choose-b",
  b: "choose-b",
  "0": "choose-nd",
  n: "choose-nd",
};

export class AppView {
  constructor(
    private readonly root: HTMLElement,
    private readonly flow: SessionFlow,
    private readonly player: PairPlayer,
    private readonly calibration: CalibrationTone,
  ) {}

  mount(): void {
    this.flow.onChange = (view) => this.render(view);
    this.player.onChange = () => this.syncControls();
    this.root.addEventListener("click", (event) => {
      const target = event.target as HTMLElement | null;
      const button = target?.closest("button");
      if (button instanceof HTMLButtonElement && !button.disabled) {
        void this.activate(button.id);
      }
    });
    this.root.ownerDocument.addEventListener("keydown", (event) => {
      const id = KEY_TO_BUTTON[event.key.toLowerCase()];
      if (!id) {
        return;
      }
      const button = this.root.querySelector<HTMLButtonElement>(`#${id}`);
      if (button && !button.disabled) {
        event.preventDefault();
        void this.activate(id);
      }
    });
    this.render(this.flow.view);
  }

  private async activate(id: string): Promise<void> {
    if (id === "play-tone") {
      await this.calibration.play();
      return;
    }
    if (id === "calibration-continue") {
      this.calibration.stop();
      await this.flow.beginTrials();
      return;
    }
    if (id === "play-a" || id === "play-b") {
      await this.player.play(id.slice(-1) as Slot);
      return;
    }
    if (id in CHOICE_LABELS) {
      if (!this.player.bothPlayed) {
        return; // gate: both clips must have played through once
      }
      this.player.stop();
      await this.flow.answer(CHOICE_LABELS[id]);
      return;
    }
    if (id === "retry-button") {
      await this.flow.retry();
    }
  }

  render(view: ClientSessionView): void {
    switch (view.phase) {
      case "idle":
      case "loading":
        this.root.innerHTML = `<main><p id="status" role="status">Loading…</p></main>`;
        break;
      case "calibration":
        this.renderCalibration();
        break;
      case "trial":
      case "submitting":
        this.renderTrial(view);
        break;
      case "complete":
        this.renderResult(view);
        break;
      case "error":
        this.renderError(view);
        break;
    }
    this.syncControls();
  }

  private renderCalibration(): void {
    this.root.innerHTML = `
      <main>
        <h1>Before you start</h1>
        <p>Put on your headphones, play the tone, and set a comfortable
           volume. Keep the volume unchanged during the test.</p>
        <button id="play-tone">Play tone</button>
        <button id="calibration-continue">The volume is comfortable — start</button>
      </main>`;
  }

  private renderTrial(view: ClientSessionView): void {
    const progress =
      view.totalTrials !== null
        ? `Question ${view.trialIndex} of ${view.totalTrials}`
        : `Trial ${view.trialIndex} (at most ${view.maxTrials})`;
    const submitting = view.phase === "submitting";
    this.root.innerHTML = `
      <main>
        <p id="progress">${progress}</p>
        <p>Listen to both recordings, then pick the one with better
           sound quality.</p>
        <div id="playback">
          <button id="play-a">Play recording A</button>
          <button id="play-b">Play recording B</button>
        </div>
        <div id="choices" role="group" aria-label="your judgement">
          <button id="choose-a">A sounds better</button>
          <button id="choose-b">B sounds better</button>
          ${
            view.allowNotDetectable
              ? `<button id="choose-nd">I hear no difference</button>`
              : ""
          }
        </div>
        <p id="gate-hint">${
          submitting ? "Submitting…" : "Play both recordings to unlock the answers."
        }</p>
      </main>`;
  }

  private renderResult(view: ClientSessionView): void {
    const result = view.result;
    if (!result) {
      this.renderError(view);
      return;
    }
    if (result.kind === "screening") {
      if (result.verdict === "pass") {
        this.root.innerHTML = `
          <main>
            <h1 id="verdict" data-verdict="pass">Your setup is suitable</h1>
            <p>You answered ${result.n_correct} of ${result.n_questions}
               comparisons correctly. Keep your headphones on and your
               volume unchanged.</p>
            <button id="continue-button">Continue to the rating task</button>
          </main>`;
      } else {
        const continueButton = result.proceed_to_rating
          ? `<button id="continue-button">Continue anyway</button>`
          : "";
        this.root.innerHTML = `
          <main>
            <h1 id="verdict" data-verdict="fail">Your environment is not suitable right now</h1>
            <p>You answered ${result.n_correct} of ${result.n_questions}
               comparisons correctly. Try moving to a quieter place and
               use headphones rather than loudspeakers, then test again.</p>
            <button id="retry-button">Test again</button>
            ${continueButton}
          </main>`;
      }
      return;
    }
    const readout = result.valid
      ? `Your just-noticeable quality difference is ${result.jnd_db?.toFixed(1)} dB
         of speech-to-noise ratio (from ${result.n_trials} comparisons).`
      : `The session ended before a threshold could be measured
         (${result.n_trials} comparisons).`;
    this.root.innerHTML = `
      <main>
        <h1 id="verdict" data-verdict="staircase">Measurement complete</h1>
        <p id="jnd-readout">${readout}</p>
        <button id="continue-button">Finish</button>
      </main>`;
  }

  private renderError(view: ClientSessionView): void {
    this.root.innerHTML = `
      <main>
        <p id="error-banner" role="alert">Connection problem:
           ${view.error ?? "unknown error"}.</p>
        <button id="retry-button">Try again</button>
      </main>`;
  }

  /** Load clips for a fresh trial and keep the gate in sync. */
  private syncControls(): void {
    const view = this.flow.view;
    if (view.phase === "trial" && view.audioUrls) {
      const pairKey = view.audioUrls.a + view.audioUrls.b;
      if (this.loadedUrls !== pairKey) {
        // mark before loading: load() notifies synchronously and the
        // notification funnels right back here
        this.loadedUrls = pairKey;
        this.player.load(view.audioUrls.a, view.audioUrls.b);
      }
    } else if (view.phase !== "submitting") {
      this.loadedUrls = null;
    }
    const unlocked = this.player.bothPlayed && view.phase === "trial";
    for (const id of Object.keys(CHOICE_LABELS)) {
      const button = this.root.querySelector<HTMLButtonElement>(`#${id}`);
      if (button) {
        button.disabled = !unlocked;
      }
    }
    const hint = this.root.querySelector<HTMLElement>("#gate-hint");
    if (hint && view.phase === "trial" && this.player.bothPlayed) {
      hint.textContent = "Pick the recording with better quality.";
    }
  }

  private loadedUrls: string | null = null;
}
