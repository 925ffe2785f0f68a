/**
 * Entry point: wire the flow to the real browser audio stack.
 *
 * Query parameters select the session: ?kind=screening&level=10 or
 * ?kind=staircase, with an optional &base= for a service on another
 * origin.
 */

import { JndqApi, SessionKind } from "./api.js";
import { PairPlayer } from "./player.js";
import { SessionFlow } from "./session.js";
import { AppView, CalibrationTone } from "./view.js";

function webAudioTone(): CalibrationTone {
  let context: AudioContext | null = null;
  let oscillator: OscillatorNode | null = null;
  return {
    play() {
      context = context ?? new AudioContext();
      oscillator?.stop();
      oscillator = context.createOscillator();
      oscillator.frequency.value = 440;
      const gain = context.createGain();
      gain.gain.value = 0.2;
      oscillator.connect(gain).connect(context.destination);
      oscillator.start();
      oscillator.stop(context.currentTime + 2.0);
    },
    stop() {
      oscillator?.stop();
      oscillator = null;
    },
  };
}

function boot(): void {
  const params = new URLSearchParams(window.location.search);
  const kind = (params.get("kind") ?? "screening") as SessionKind;
  const api = new JndqApi(params.get("base") ?? "");
  const flow = new SessionFlow(api);
  const player = new PairPlayer((url) => new Audio(url));
  const root = document.getElementById("app");
  if (!root) {
    throw new Error("missing #app mount point");
  }
  new AppView(root, flow, player, webAudioTone()).mount();

  const config: Record<string, unknown> = {};
  const level = params.get("level");
  if (kind === "screening") {
    config.jnd_level_db = level ? Number(level) : 10;
  }
  void flow.start(kind, config);
}

document.addEventListener("DOMContentLoaded", boot);
