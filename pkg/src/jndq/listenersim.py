"""Parametric simulated listeners and Monte-Carlo validation harnesses.

A listener answers a pair comparison correctly with probability

    p(d) = guess + (1 - guess - lapse) * logistic((d - mu) / sigma)

where d is the SNR gap between reference and dynamic stimulus. The
two-down-one-up staircase is stationary where p(d) = sqrt(0.5), so the
harnesses here check that estimated JNDs land on that point and that
screening pass rates order sensibly across levels and criteria, all
without human subjects.

Preset midpoints loosely follow laboratory group means for a silent room
with headphones (~9.9 dB), a noisy room (~11.3 dB) and loudspeaker
playback (~12.4 dB); they are illustrative test instruments, not
calibrated listener models.
"""

from __future__ import annotations

import math
import random
import statistics
from dataclasses import dataclass, replace

from .screening import Screening, ScreeningConfig
from .seeds import derive_seed
from .staircase import Staircase, StaircaseConfig, ThresholdResult
from .trials import ANSWER_NOT_DETECTABLE, ANSWERS, TrialSpec

CONVERGENCE_TARGET = math.sqrt(0.5)

LISTENER_PRESETS = {
    "silent-headphone": {"mu_db": 9.86, "sigma_db": 1.0},
    "noisy": {"mu_db": 11.33, "sigma_db": 1.0},
    "loudspeaker": {"mu_db": 12.4, "sigma_db": 1.0},
}


class PsychometricRangeError(ValueError):
    """Requested probability is outside the listener's reachable range."""


def _logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@dataclass
class SimulatedListener:
    """Stochastic 3AFC responder with a logistic psychometric function.

    sigma_db = 0 degenerates to a hard threshold at mu_db. guess_rate is
    the correct-answer floor at zero gap; lapse_rate caps performance at
    1 - lapse_rate no matter how easy the trial.
    """

    mu_db: float
    sigma_db: float = 1.0
    guess_rate: float = 0.5
    lapse_rate: float = 0.02
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.sigma_db < 0:
            raise ValueError(f"sigma_db must be >= 0, got {self.sigma_db}")
        if not 0.0 <= self.guess_rate < 1.0 or not 0.0 <= self.lapse_rate < 1.0:
            raise ValueError("guess_rate and lapse_rate must lie in [0, 1)")
        if self.guess_rate + self.lapse_rate >= 1.0:
            raise ValueError("guess_rate + lapse_rate must be < 1")
        self._rng = random.Random(self.rng_seed)

    def with_seed(self, rng_seed: int) -> "SimulatedListener":
        return replace(self, rng_seed=rng_seed)

    def p_correct(self, delta_snr_db: float) -> float:
        span = 1.0 - self.guess_rate - self.lapse_rate
        if self.sigma_db == 0:
            if delta_snr_db > self.mu_db:
                shape = 1.0
            elif delta_snr_db == self.mu_db:
                shape = 0.5
            else:
                shape = 0.0
        else:
            shape = _logistic((delta_snr_db - self.mu_db) / self.sigma_db)
        return self.guess_rate + span * shape

    def respond(self, trial: TrialSpec) -> str:
        """Draw an answer; wrong answers split evenly between picking the
        degraded stimulus and declaring no detectable difference."""
        if self._rng.random() < self.p_correct(trial.delta_snr_db):
            return trial.correct_answer
        if self._rng.random() < 0.5:
            return ANSWER_NOT_DETECTABLE
        wrong = [a for a in ANSWERS[:2] if a != trial.correct_answer]
        return wrong[0]


def preset_listener(name: str, rng_seed: int = 0) -> SimulatedListener:
    try:
        params = LISTENER_PRESETS[name]
    except KeyError:
        raise KeyError(
            f"unknown preset {name!r}; available: {sorted(LISTENER_PRESETS)}"
        ) from None
    return SimulatedListener(rng_seed=rng_seed, **params)


def convergence_point(listener: SimulatedListener, tol_db: float = 1e-6) -> float:
    """SNR gap where p_correct crosses sqrt(0.5), found by bisection.

    This is the level the two-down-one-up staircase estimates.
    """
    target = CONVERGENCE_TARGET
    if not listener.guess_rate < target < 1.0 - listener.lapse_rate:
        raise PsychometricRangeError(
            f"target {target:.4f} outside the reachable range "
            f"({listener.guess_rate}, {1.0 - listener.lapse_rate})"
        )
    half_width = max(1.0, 60.0 * listener.sigma_db)
    lo = listener.mu_db - half_width
    hi = listener.mu_db + half_width
    for _ in range(64):
        if listener.p_correct(lo) < target < listener.p_correct(hi):
            break
        half_width *= 2.0
        lo = listener.mu_db - half_width
        hi = listener.mu_db + half_width
    else:
        raise PsychometricRangeError("could not bracket the convergence point")
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        if listener.p_correct(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class StaircaseSimSummary:
    """Batch of staircase runs for one listener."""

    results: tuple[ThresholdResult, ...]
    mean_jnd_db: float | None
    sd_jnd_db: float | None
    n_runs: int
    n_invalid: int


def run_staircase(listener: SimulatedListener, config: StaircaseConfig) -> Staircase:
    """Drive one session to completion with the given listener."""
    session = Staircase(config)
    while not session.is_complete:
        session.submit_answer(listener.respond(session.current_trial()))
    return session


def simulate_staircase(
    listener: SimulatedListener, config: StaircaseConfig, n_runs: int
) -> StaircaseSimSummary:
    """Run independent staircases with pre-derived per-run seeds.

    Seeds are derived up front from the listener and config seeds, so a
    parallel executor would produce identical results run-for-run.
    """
    if n_runs < 1:
        raise ValueError(f"n_runs must be >= 1, got {n_runs}")
    results = []
    for run in range(n_runs):
        run_listener = listener.with_seed(
            derive_seed(listener.rng_seed, "staircase-run", run)
        )
        run_config = config.with_order_seed(
            derive_seed(config.order_seed, "staircase-run", run)
        )
        results.append(run_staircase(run_listener, run_config).threshold())
    estimates = [r.jnd_db for r in results if r.valid]
    return StaircaseSimSummary(
        results=tuple(results),
        mean_jnd_db=statistics.fmean(estimates) if estimates else None,
        sd_jnd_db=statistics.stdev(estimates) if len(estimates) > 1 else None,
        n_runs=n_runs,
        n_invalid=n_runs - len(estimates),
    )


def screening_outcomes(
    listener: SimulatedListener, config: ScreeningConfig, n_runs: int
) -> list[int]:
    """Number of correct answers per simulated screening session.

    Outcomes can be re-graded under any acceptance criterion afterwards,
    mirroring how recorded human sessions are analyzed.
    """
    if n_runs < 1:
        raise ValueError(f"n_runs must be >= 1, got {n_runs}")
    outcomes = []
    for run in range(n_runs):
        run_listener = listener.with_seed(
            derive_seed(listener.rng_seed, "screening-run", run)
        )
        run_config = config.with_order_seed(
            derive_seed(config.order_seed, "screening-run", run)
        )
        session = Screening(run_config)
        while not session.is_complete:
            session.submit_answer(run_listener.respond(session.current_trial()))
        outcomes.append(session.n_correct)
    return outcomes


def simulate_screening(
    listener: SimulatedListener, config: ScreeningConfig, n_runs: int
) -> float:
    """Fraction of simulated sessions that pass the configured criterion."""
    outcomes = screening_outcomes(listener, config, n_runs)
    passed = sum(1 for n in outcomes if n >= config.acceptance_k)
    return passed / len(outcomes)
