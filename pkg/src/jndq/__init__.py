"""Toolkit for JND-of-quality listening tests over SNR-degraded speech.

Covers stimulus generation (white-noise degradation at labeled SNR),
the adaptive 3AFC two-down-one-up staircase, the four-question screening
variant used to qualify remote listeners, simulated-listener validation
harnesses, rating analysis against laboratory MOS, and a session service
for driving live tests.
"""

__version__ = "0.1.0"

from .audio import (
    AudioBuffer,
    build_stimulus_set,
    generate_white_noise,
    load_wav,
    measure_snr,
    mix_at_snr,
    save_wav,
    signal_power,
)
from .screening import Screening, ScreeningConfig
from .staircase import Staircase, StaircaseConfig, ThresholdResult
from .trials import (
    ANSWER_FIRST,
    ANSWER_NOT_DETECTABLE,
    ANSWER_SECOND,
    StimulusSpec,
    TrialRecord,
    TrialSpec,
)

__all__ = [
    "ANSWER_FIRST",
    "ANSWER_NOT_DETECTABLE",
    "ANSWER_SECOND",
    "AudioBuffer",
    "Screening",
    "ScreeningConfig",
    "Staircase",
    "StaircaseConfig",
    "StimulusSpec",
    "ThresholdResult",
    "TrialRecord",
    "TrialSpec",
    "build_stimulus_set",
    "generate_white_noise",
    "load_wav",
    "measure_snr",
    "mix_at_snr",
    "save_wav",
    "signal_power",
]
