import numpy as np
import pytest

from jndq.audio import AudioBuffer, synthesize_voice


@pytest.fixture(scope="session")
def voice():
    """Deterministic speech-like source, ~3 s at 16 kHz."""
    return synthesize_voice(duration_s=3.0, sample_rate=16000, seed=11)


@pytest.fixture(scope="session")
def short_voice():
    """Half-second source for tests that render many files."""
    return synthesize_voice(duration_s=0.5, sample_rate=16000, seed=23)


@pytest.fixture(scope="session")
def four_sources():
    """Four distinct short sources, like the 2-male/2-female set."""
    out = []
    for index, f0 in enumerate((210.0, 195.0, 125.0, 110.0)):
        out.append(
            (
                f"voice{index + 1:02d}",
                synthesize_voice(
                    duration_s=0.4, sample_rate=16000, f0_hz=f0, seed=100 + index
                ),
            )
        )
    return out


@pytest.fixture
def constant_buffer():
    return AudioBuffer(samples=np.full(1000, 0.1), sample_rate=8000)
