/**
 * Sequential A/B pair playback with a played-once gate.
 *
 * Clips play one at a time (starting one pauses the other) and a slot
 * only counts as heard after its clip has played through to the end once.
 * Replays are always allowed. The audio element is injected so tests can
 * substitute a fake, and so the gate cannot be bypassed by re-rendering.
 */

export interface AudioClip {
  play(): Promise<void> | void;
  pause(): void;
  addEventListener(type: "ended" | "error", listener: () => void): void;
  currentTime: number;
}

export type AudioFactory = (url: string) => AudioClip;

export type Slot = "a" | "b";

export class PairPlayer {
  private clips: Record<Slot, AudioClip | null> = { a: null, b: null };
  private playedOnce: Record<Slot, boolean> = { a: false, b: false };
  private playing: Slot | null = null;
  onChange: (() => void) | null = null;

  constructor(private readonly factory: AudioFactory) {}

  /** Point the player at a new pair; resets the played-once gate. */
  load(aUrl: string, bUrl: string): void {
    this.stop();
    this.playedOnce = { a: false, b: false };
    this.clips = { a: this.factory(aUrl), b: this.factory(bUrl) };
    for (const slot of ["a", "b"] as Slot[]) {
      const clip = this.clips[slot];
      clip?.addEventListener("ended", () => {
        this.playedOnce[slot] = true;
        if (this.playing === slot) {
          this.playing = null;
        }
        this.notify();
      });
    }
    this.notify();
  }

  get loaded(): boolean {
    return this.clips.a !== null && this.clips.b !== null;
  }

  get bothPlayed(): boolean {
    return this.playedOnce.a && this.playedOnce.b;
  }

  hasPlayed(slot: Slot): boolean {
    return this.playedOnce[slot];
  }

  get nowPlaying(): Slot | null {
    return this.playing;
  }

  /** Start (or restart) one clip from the top, pausing the other. */
  async play(slot: Slot): Promise<void> {
    const clip = this.clips[slot];
    if (!clip) {
      throw new Error("no trial loaded");
    }
    const other: Slot = slot === "a" ? "b" : "a";
    if (this.playing === other) {
      this.clips[other]?.pause();
    }
    clip.currentTime = 0;
    this.playing = slot;
    this.notify();
    await clip.play();
  }

  stop(): void {
    if (this.playing) {
      this.clips[this.playing]?.pause();
      this.playing = null;
      this.notify();
    }
  }

  private notify(): void {
    this.onChange?.();
  }
}
