"""Mono PCM audio handling and SNR-controlled white-noise degradation.

All stimuli are mono float buffers normalized to [-1, 1]. Degradation adds
seeded Gaussian white noise scaled so the realized speech-to-noise ratio
matches the requested label exactly (noise is normalized to unit sample
power before scaling, so short buffers do not suffer sampling error in the
label). Speech power is the full-buffer mean square.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.io import wavfile

from .seeds import derive_seed

REFERENCE_SNR_DB = 50
DEFAULT_LEVELS_DB = tuple(range(35, 51))

# Hard failure threshold for clipped samples in a rendered mix. At the SNR
# range used here noise sits ~35 dB below speech, so any real clipping
# indicates a defective (near-full-scale) source.
MAX_CLIPPED_FRACTION = 0.001

_INT16_SCALE = 32768.0


class AudioError(Exception):
    """Base class for audio handling failures."""


class UnsupportedFormatError(AudioError):
    """File is not a mono 16-bit-integer or 32-bit-float PCM WAV."""


class TruncatedFileError(AudioError):
    """WAV payload is shorter than its header promises."""


class SilentInputError(AudioError):
    """Operation requires a non-silent signal."""


class ClippingError(AudioError):
    """Rendered mix clipped more samples than the allowed fraction."""


@dataclass
class AudioBuffer:
    """Mono sample sequence at a fixed sample rate.

    Stimulus buffers (anything loaded, mixed, or saved) stay within
    [-1, 1]; raw noise carriers from generate_white_noise may exceed
    full scale until they are mixed.
    """

    samples: np.ndarray
    sample_rate: int
    channels: int = 1

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("samples must be one-dimensional (mono)")
        if self.channels != 1:
            raise ValueError("only mono buffers are supported")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class MixResult:
    """A degraded stimulus plus how many samples had to be clamped."""

    buffer: AudioBuffer
    clipped_samples: int


def load_wav(path: str | Path) -> AudioBuffer:
    """Load a mono PCM WAV (16-bit int or 32-bit float) normalized to [-1, 1]."""
    path = Path(path)
    try:
        with warnings.catch_warnings():
            # scipy only warns when the payload is shorter than the header
            # promises; a partial stimulus must never load silently.
            warnings.simplefilter("error", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except wavfile.WavFileWarning as exc:
        raise TruncatedFileError(f"{path}: {exc}") from exc
    except ValueError as exc:
        if "incomplete" in str(exc).lower() or "unexpected end" in str(exc).lower():
            raise TruncatedFileError(f"{path}: {exc}") from exc
        raise UnsupportedFormatError(f"{path}: {exc}") from exc
    if data.ndim != 1:
        raise UnsupportedFormatError(
            f"{path}: channels unsupported ({data.shape[1]} channels, need mono)"
        )
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / _INT16_SCALE
    elif data.dtype == np.float32:
        samples = np.clip(data.astype(np.float64), -1.0, 1.0)
    else:
        raise UnsupportedFormatError(
            f"{path}: sample format {data.dtype} unsupported (need int16 or float32)"
        )
    if len(samples) == 0:
        raise TruncatedFileError(f"{path}: no samples")
    return AudioBuffer(samples=samples, sample_rate=int(rate))


def save_wav(buffer: AudioBuffer, path: str | Path) -> int:
    """Write a buffer as mono 16-bit PCM WAV.

    Samples outside [-1, 1] are clamped first; returns how many were.
    Quantization is round-to-nearest against a 1/32768 step, so a
    save/load round trip is exact for values that came from 16-bit PCM.
    """
    x = np.asarray(buffer.samples, dtype=np.float64)
    outside = int(np.count_nonzero((x < -1.0) | (x > 1.0)))
    x = np.clip(x, -1.0, 1.0)
    q = np.clip(np.round(x * _INT16_SCALE), -32768, 32767).astype(np.int16)
    wavfile.write(Path(path), buffer.sample_rate, q)
    return outside


def signal_power(buffer: AudioBuffer) -> float:
    """Mean square of the full buffer (linear, dimensionless)."""
    if len(buffer) == 0:
        raise SilentInputError("cannot compute power of an empty buffer")
    return float(np.mean(np.square(buffer.samples)))


def generate_white_noise(n_samples: int, seed: int, sample_rate: int = 1) -> AudioBuffer:
    """Zero-mean Gaussian white noise with unit mean-square power.

    Deterministic for a given seed. Raw draws are not rescaled, so the
    sample power of a finite buffer fluctuates around 1 as expected.
    """
    if n_samples <= 0:
        raise ValueError(f"n_samples must be positive, got {n_samples}")
    rng = np.random.Generator(np.random.PCG64(seed))
    return AudioBuffer(samples=rng.standard_normal(n_samples), sample_rate=sample_rate)


def mix_at_snr(speech: AudioBuffer, snr_db: float, seed: int) -> MixResult:
    """Add seeded white noise to speech at an exact SNR in dB.

    The noise is scaled to power P_speech / 10^(snr_db/10) measured over
    this realization, so the labeled and realized SNR agree to float
    precision. Output samples are clamped to [-1, 1]; more than
    MAX_CLIPPED_FRACTION clipped samples is an error.
    """
    if not math.isfinite(snr_db):
        raise ValueError(f"snr_db must be finite, got {snr_db}")
    p_speech = signal_power(speech)
    if p_speech == 0.0:
        raise SilentInputError("speech signal is silent; SNR is undefined")
    noise = generate_white_noise(len(speech), seed).samples
    gain = math.sqrt(p_speech / 10.0 ** (snr_db / 10.0))
    noise = noise * (gain / math.sqrt(float(np.mean(np.square(noise)))))
    mixed = speech.samples + noise
    clipped = int(np.count_nonzero((mixed < -1.0) | (mixed > 1.0)))
    if clipped > MAX_CLIPPED_FRACTION * len(mixed):
        raise ClippingError(
            f"{clipped}/{len(mixed)} samples clipped at {snr_db} dB SNR; "
            "source is too close to full scale"
        )
    mixed = np.clip(mixed, -1.0, 1.0)
    return MixResult(
        buffer=AudioBuffer(samples=mixed, sample_rate=speech.sample_rate),
        clipped_samples=clipped,
    )


def measure_snr(clean: AudioBuffer, degraded: AudioBuffer) -> float:
    """SNR in dB of a degraded signal against its clean original.

    Extracts noise as the sample-wise difference. Returns +inf when the
    two signals are identical.
    """
    if len(clean) != len(degraded):
        raise ValueError(
            f"length mismatch: clean {len(clean)} vs degraded {len(degraded)}"
        )
    if clean.sample_rate != degraded.sample_rate:
        raise ValueError(
            f"sample rate mismatch: {clean.sample_rate} vs {degraded.sample_rate}"
        )
    p_clean = signal_power(clean)
    p_noise = float(np.mean(np.square(degraded.samples - clean.samples)))
    if p_noise == 0.0:
        return math.inf
    return 10.0 * math.log10(p_clean / p_noise)


@dataclass(frozen=True)
class StimulusEntry:
    """One rendered stimulus as recorded in the manifest."""

    stimulus_id: str
    source_id: str
    snr_db: int
    seed: int
    file: str
    measured_snr_db: float
    sha256: str


@dataclass
class StimulusSet:
    """A rendered grid of (source x SNR level) stimuli plus its manifest."""

    sources: list[tuple[str, AudioBuffer]]
    levels: tuple[int, ...]
    reference_level_db: int
    master_seed: int
    root: Path
    stimuli: list[StimulusEntry] = field(default_factory=list)

    @property
    def manifest_path(self) -> Path:
        return self.root / "manifest.json"


def stimulus_seed(master_seed: int, source_id: str, snr_db: int) -> int:
    """Per-stimulus noise seed; lets any one file be re-rendered alone."""
    return derive_seed(master_seed, source_id, int(snr_db))


def file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def build_stimulus_set(
    sources: Sequence[tuple[str, AudioBuffer]],
    levels: Sequence[int],
    master_seed: int,
    out_dir: str | Path,
) -> StimulusSet:
    """Render every (source, level) pair into out_dir and write a manifest.

    Sources are first written as 16-bit PCM copies and re-loaded, so all
    rendering starts from the exact on-disk bytes; rebuilding with the
    same master seed reproduces identical files. The manifest records the
    measured SNR of every rendered file against its source copy.
    """
    if not sources:
        raise ValueError("need at least one source")
    if not levels:
        raise ValueError("need at least one SNR level")
    levels = tuple(sorted(int(level) for level in levels))
    root = Path(out_dir)
    (root / "sources").mkdir(parents=True, exist_ok=True)
    (root / "stimuli").mkdir(parents=True, exist_ok=True)

    source_entries = []
    loaded: list[tuple[str, AudioBuffer]] = []
    for source_id, buffer in sources:
        src_path = root / "sources" / f"{source_id}.wav"
        save_wav(buffer, src_path)
        clean = load_wav(src_path)
        loaded.append((source_id, clean))
        source_entries.append(
            {
                "source_id": source_id,
                "file": f"sources/{source_id}.wav",
                "sample_rate": clean.sample_rate,
                "n_samples": len(clean),
                "sha256": file_sha256(src_path),
            }
        )

    stimulus_set = StimulusSet(
        sources=loaded,
        levels=levels,
        reference_level_db=max(levels),
        master_seed=master_seed,
        root=root,
    )
    for source_id, clean in loaded:
        for level in levels:
            seed = stimulus_seed(master_seed, source_id, level)
            stimulus_id = f"{source_id}_snr{level:02d}"
            rel = f"stimuli/{stimulus_id}.wav"
            out_path = root / rel
            save_wav(mix_at_snr(clean, level, seed).buffer, out_path)
            rendered = load_wav(out_path)
            stimulus_set.stimuli.append(
                StimulusEntry(
                    stimulus_id=stimulus_id,
                    source_id=source_id,
                    snr_db=level,
                    seed=seed,
                    file=rel,
                    measured_snr_db=round(measure_snr(clean, rendered), 4),
                    sha256=file_sha256(out_path),
                )
            )

    manifest = {
        "master_seed": master_seed,
        "levels_db": list(levels),
        "reference_level_db": stimulus_set.reference_level_db,
        "sources": source_entries,
        "stimuli": [entry.__dict__ for entry in stimulus_set.stimuli],
    }
    stimulus_set.manifest_path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return stimulus_set


VOICE_BAND_LIMIT_HZ = 2000.0


def synthesize_voice(
    duration_s: float = 3.0,
    sample_rate: int = 16000,
    f0_hz: float = 160.0,
    seed: int = 0,
) -> AudioBuffer:
    """Deterministic speech-like test signal (harmonic stack with syllabic
    amplitude modulation and pauses), band-limited to 2 kHz and RMS-scaled
    to 0.1.

    Stands in for recorded speech in desk-scale runs and tests; it is not
    a perceptual substitute for real source material. The hard band limit
    keeps the spectrum above it purely additive noise, so content-based
    checks can read the noise floor directly.
    """
    n = int(round(duration_s * sample_rate))
    if n <= 0:
        raise ValueError("duration must be positive")
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "voice")))
    t = np.arange(n) / sample_rate

    # Slow pitch contour: random walk around f0 with gentle vibrato.
    contour = np.cumsum(rng.standard_normal(8)) * 0.02
    drift = np.interp(t, np.linspace(0.0, duration_s, len(contour)), contour)
    f0 = f0_hz * (1.0 + drift + 0.015 * np.sin(2.0 * np.pi * 5.0 * t))
    phase = 2.0 * np.pi * np.cumsum(f0) / sample_rate

    voiced = np.zeros(n)
    k = 1
    while (k + 1) * f0_hz * 1.1 < VOICE_BAND_LIMIT_HZ * 0.8 and k <= 10:
        voiced += (1.0 / k) * np.sin(k * phase + rng.uniform(0.0, 2.0 * np.pi))
        k += 1

    # Syllable-rate envelope with seeded pauses between "words".
    syllables = np.abs(np.sin(2.0 * np.pi * 3.1 * t + rng.uniform(0.0, np.pi))) ** 0.7
    gate = np.ones(n)
    n_words = max(1, int(duration_s * 0.8))
    for _ in range(n_words):
        start = rng.uniform(0.0, duration_s)
        width = rng.uniform(0.08, 0.2)
        gate[(t >= start) & (t < start + width)] = 0.0
    # 25 ms smoothing keeps gate transitions from splattering wideband.
    kernel = np.hanning(max(3, int(sample_rate * 0.025)))
    gate = np.convolve(gate, kernel / kernel.sum(), mode="same")

    samples = voiced * syllables * gate
    # Enforce the band limit: AM sidebands and gating spread the harmonic
    # lines, so finish with a zero-phase FFT brick wall.
    spectrum = np.fft.rfft(samples)
    freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
    spectrum[freqs > VOICE_BAND_LIMIT_HZ] = 0.0
    samples = np.fft.irfft(spectrum, n)

    rms = float(np.sqrt(np.mean(np.square(samples))))
    if rms == 0.0:
        raise AudioError("synthesized signal collapsed to silence")
    samples *= 0.1 / rms
    return AudioBuffer(samples=np.clip(samples, -1.0, 1.0), sample_rate=sample_rate)
