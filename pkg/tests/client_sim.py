"""Scripted remote client for end-to-end runs against a live service.

Grades each pair purely from the downloaded audio, the way a listener
would: the synthetic voices carry no energy above ~3 kHz, so the power in
the high band is the noise floor. The clip with the lower noise floor
sounds better; when the two floors differ by less than a margin the
client declares the difference not detectable. No server internals are
consulted, so verdicts are honest round trips through the full stack.
"""

from __future__ import annotations

import io
import time

import httpx
import numpy as np
from scipy.io import wavfile

NOISE_BAND_HZ = 3000.0


def noise_floor_db(wav_bytes: bytes) -> float:
    rate, data = wavfile.read(io.BytesIO(wav_bytes))
    x = data.astype(np.float64) / 32768.0
    spectrum = np.abs(np.fft.rfft(x)) ** 2
    freqs = np.fft.rfftfreq(len(x), 1.0 / rate)
    band = spectrum[freqs >= NOISE_BAND_HZ]
    return 10.0 * float(np.log10(np.mean(band)))


class SpectralClient:
    """Drives sessions over the /v1 API, answering from audio content."""

    def __init__(self, base_url: str, margin_db: float = 3.0, timeout: float = 30.0):
        self.http = httpx.Client(base_url=base_url, timeout=timeout)
        self.margin_db = margin_db

    def close(self) -> None:
        self.http.close()

    def wait_healthy(self, attempts: int = 100, delay: float = 0.1) -> None:
        for _ in range(attempts):
            try:
                if self.http.get("/v1/health").status_code == 200:
                    return
            except httpx.TransportError:
                pass
            time.sleep(delay)
        raise RuntimeError("service did not become healthy")

    def _answer_for(self, trial: dict) -> str:
        clips = []
        for url in (trial["stimulus_a_url"], trial["stimulus_b_url"]):
            response = self.http.get(url)
            response.raise_for_status()
            clips.append(noise_floor_db(response.content))
        gap = clips[0] - clips[1]
        if abs(gap) < self.margin_db:
            return "not_detectable"
        return "first_better" if gap < 0 else "second_better"

    def create(self, kind: str, config: dict) -> str:
        response = self.http.post("/v1/sessions", json={"kind": kind, "config": config})
        response.raise_for_status()
        return response.json()["session_id"]

    def step(self, session_id: str) -> dict:
        trial = self.http.get(f"/v1/sessions/{session_id}/trial")
        trial.raise_for_status()
        payload = trial.json()
        ack = self.http.post(
            f"/v1/sessions/{session_id}/answers",
            json={
                "trial_index": payload["trial_index"],
                "answer": self._answer_for(payload),
            },
        )
        ack.raise_for_status()
        return ack.json()

    def run(self, kind: str, config: dict) -> dict:
        session_id = self.create(kind, config)
        while not self.step(session_id)["complete"]:
            pass
        result = self.http.get(f"/v1/sessions/{session_id}/result")
        result.raise_for_status()
        return {"session_id": session_id, **result.json()}
