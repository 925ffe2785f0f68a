import { describe, expect, it } from "vitest";

import { PairPlayer } from "../src/player.js";
import { FakeAudioFactory } from "./fakes.js";

function loadedPlayer() {
  const audio = new FakeAudioFactory();
  const player = new PairPlayer(audio.factory);
  player.load("/clip-a.wav", "/clip-b.wav");
  return { audio, player };
}

describe("PairPlayer", () => {
  it("starts with the gate closed", () => {
    const { player } = loadedPlayer();
    expect(player.bothPlayed).toBe(false);
    expect(player.hasPlayed("a")).toBe(false);
  });

  it("counts a clip only after it has played to the end", async () => {
    const { audio, player } = loadedPlayer();
    await player.play("a");
    expect(player.hasPlayed("a")).toBe(false); // started, not finished
    audio.currentPair[0].fireEnded();
    expect(player.hasPlayed("a")).toBe(true);
    expect(player.bothPlayed).toBe(false);
    await player.play("b");
    audio.currentPair[1].fireEnded();
    expect(player.bothPlayed).toBe(true);
  });

  it("enforces sequential playback: starting one pauses the other", async () => {
    const { audio, player } = loadedPlayer();
    await player.play("a");
    const [clipA] = audio.currentPair;
    expect(clipA.paused).toBe(false);
    await player.play("b");
    expect(clipA.paused).toBe(true);
    expect(player.nowPlaying).toBe("b");
  });

  it("allows replays and restarts from the top", async () => {
    const { audio, player } = loadedPlayer();
    await player.play("a");
    audio.currentPair[0].fireEnded();
    audio.currentPair[0].currentTime = 3.2;
    await player.play("a");
    expect(audio.currentPair[0].currentTime).toBe(0);
    expect(audio.currentPair[0].playCount).toBe(2);
    expect(player.hasPlayed("a")).toBe(true); // replay never revokes
  });

  it("resets the gate when a new pair is loaded", async () => {
    const { audio, player } = loadedPlayer();
    await player.play("a");
    audio.currentPair[0].fireEnded();
    await player.play("b");
    audio.currentPair[1].fireEnded();
    expect(player.bothPlayed).toBe(true);
    player.load("/next-a.wav", "/next-b.wav");
    expect(player.bothPlayed).toBe(false);
    expect(audio.clips.length).toBe(4);
  });

  it("notifies on every state change", async () => {
    const audio = new FakeAudioFactory();
    const player = new PairPlayer(audio.factory);
    let notifications = 0;
    player.onChange = () => {
      notifications += 1;
    };
    player.load("/a.wav", "/b.wav");
    await player.play("a");
    audio.currentPair[0].fireEnded();
    expect(notifications).toBeGreaterThanOrEqual(3);
  });

  it("refuses to play before a pair is loaded", async () => {
    const player = new PairPlayer(new FakeAudioFactory().factory);
    await expect(player.play("a")).rejects.toThrow("no trial loaded");
  });
});
