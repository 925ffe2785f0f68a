"""Adaptive 3AFC two-down-one-up staircase over dynamic-stimulus SNR.

The dynamic stimulus starts 15 dB below the 50 dB reference. Two
consecutive correct picks raise its SNR one step (shrinking the audible
gap); any wrong answer lowers it one step. A reversal is logged whenever
the movement direction flips, storing the extremum SNR reached before the
turn. The session ends after 7 reversals or 45 trials, and the threshold
is the mean of the reversal SNRs with the first reversal discarded; the
JND is the reference SNR minus that mean. The rule is stationary where
the probability of a correct answer is sqrt(0.5) ~ 70.7%.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from .trials import (
    ANSWERS,
    DEFAULT_SOURCE_IDS,
    NotCompleteError,
    SessionCompleteError,
    TrialRecord,
    TrialSpec,
    make_trial_spec,
)

DIRECTION_NONE = "none"
DIRECTION_UP = "up"
DIRECTION_DOWN = "down"


class ConfigError(ValueError):
    """Staircase configuration violates its invariants."""


@dataclass(frozen=True)
class StaircaseConfig:
    """Parameters of one adaptive session.

    n_down is the number of consecutive correct answers required before
    the audible gap shrinks (dynamic SNR steps up); n_up is the number of
    wrong answers before it widens again. The dynamic stimulus is capped
    one step below the reference: at the reference level the two clips
    would be statistically identical and "correct" undefined.
    """

    reference_snr_db: int = 50
    start_dynamic_snr_db: int = 35
    step_db: int = 1
    n_down: int = 2
    n_up: int = 1
    max_reversals: int = 7
    max_trials: int = 45
    dynamic_bounds_db: tuple[int, int] = (35, 49)
    order_seed: int = 0
    source_ids: tuple[str, ...] = DEFAULT_SOURCE_IDS

    def validate(self) -> None:
        lo, hi = self.dynamic_bounds_db
        if lo > hi:
            raise ConfigError(f"empty dynamic bounds {self.dynamic_bounds_db}")
        if not lo <= self.start_dynamic_snr_db <= hi:
            raise ConfigError(
                f"start {self.start_dynamic_snr_db} dB outside bounds [{lo}, {hi}]"
            )
        if hi >= self.reference_snr_db:
            raise ConfigError(
                f"dynamic upper bound {hi} dB must stay below the "
                f"{self.reference_snr_db} dB reference"
            )
        if self.step_db <= 0:
            raise ConfigError(f"step_db must be positive, got {self.step_db}")
        if self.n_down < 1 or self.n_up < 1:
            raise ConfigError("n_down and n_up must be at least 1")
        if self.max_reversals < 2:
            raise ConfigError(f"max_reversals must be >= 2, got {self.max_reversals}")
        if self.max_trials < self.max_reversals:
            raise ConfigError(
                f"max_trials {self.max_trials} < max_reversals {self.max_reversals}"
            )
        if not self.source_ids:
            raise ConfigError("source_ids must not be empty")

    def to_dict(self) -> dict:
        return {
            "reference_snr_db": self.reference_snr_db,
            "start_dynamic_snr_db": self.start_dynamic_snr_db,
            "step_db": self.step_db,
            "n_down": self.n_down,
            "n_up": self.n_up,
            "max_reversals": self.max_reversals,
            "max_trials": self.max_trials,
            "dynamic_bounds_db": list(self.dynamic_bounds_db),
            "order_seed": self.order_seed,
            "source_ids": list(self.source_ids),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StaircaseConfig":
        return cls(
            reference_snr_db=int(data["reference_snr_db"]),
            start_dynamic_snr_db=int(data["start_dynamic_snr_db"]),
            step_db=int(data["step_db"]),
            n_down=int(data["n_down"]),
            n_up=int(data["n_up"]),
            max_reversals=int(data["max_reversals"]),
            max_trials=int(data["max_trials"]),
            dynamic_bounds_db=tuple(int(v) for v in data["dynamic_bounds_db"]),
            order_seed=int(data["order_seed"]),
            source_ids=tuple(str(s) for s in data["source_ids"]),
        )

    def with_order_seed(self, order_seed: int) -> "StaircaseConfig":
        return replace(self, order_seed=order_seed)


@dataclass(frozen=True)
class ThresholdResult:
    """Session outcome.

    threshold_snr_db is the mean of the reversal SNRs after discarding the
    first; jnd_db = reference - threshold_snr_db. A session that ended
    with fewer than two reversals has no defined threshold and is marked
    invalid (both values None).
    """

    threshold_snr_db: float | None
    jnd_db: float | None
    n_reversals_used: int
    valid: bool

    def to_dict(self) -> dict:
        return {
            "threshold_snr_db": self.threshold_snr_db,
            "jnd_db": self.jnd_db,
            "n_reversals_used": self.n_reversals_used,
            "valid": self.valid,
        }


class Staircase:
    """Single-writer state machine; apply answers serially per session."""

    def __init__(self, config: StaircaseConfig):
        config.validate()
        self.config = config
        self._snr = config.start_dynamic_snr_db
        self._run_correct = 0
        self._run_incorrect = 0
        self._last_move = DIRECTION_NONE
        self._reversals: list[int] = []
        self._trials: list[TrialRecord] = []
        self._complete = False

    @property
    def is_complete(self) -> bool:
        return self._complete

    @property
    def current_dynamic_snr_db(self) -> int:
        return self._snr

    @property
    def reversals_snr_db(self) -> tuple[int, ...]:
        return tuple(self._reversals)

    @property
    def trials(self) -> tuple[TrialRecord, ...]:
        return tuple(self._trials)

    @property
    def last_move_direction(self) -> str:
        return self._last_move

    def current_trial(self) -> TrialSpec:
        """The pending pair; stable until an answer is submitted."""
        if self._complete:
            raise SessionCompleteError("staircase session is complete")
        return make_trial_spec(
            self.config.order_seed,
            len(self._trials) + 1,
            self.config.source_ids,
            self.config.reference_snr_db,
            self._snr,
        )

    def submit_answer(self, answer: str) -> TrialRecord:
        """Grade the pending trial, move the dynamic SNR, track reversals."""
        if self._complete:
            raise SessionCompleteError("staircase session is complete")
        if answer not in ANSWERS:
            raise ValueError(f"unknown answer {answer!r}, expected one of {ANSWERS}")
        spec = self.current_trial()
        correct = answer == spec.correct_answer
        record = TrialRecord(
            trial_index=spec.trial_index,
            dynamic_snr_db=self._snr,
            reference_position=spec.reference_position,
            answer=answer,
            correct=correct,
        )
        self._trials.append(record)

        move = None
        if correct:
            self._run_correct += 1
            self._run_incorrect = 0
            if self._run_correct >= self.config.n_down:
                move = DIRECTION_UP
                self._run_correct = 0
        else:
            self._run_incorrect += 1
            self._run_correct = 0
            if self._run_incorrect >= self.config.n_up:
                move = DIRECTION_DOWN
                self._run_incorrect = 0

        if move is not None:
            # A reversal is a change of movement direction; the stored
            # value is the extremum SNR reached before turning. Clamping
            # at a bound is a move in that direction, not a reversal.
            if self._last_move != DIRECTION_NONE and move != self._last_move:
                self._reversals.append(self._snr)
            lo, hi = self.config.dynamic_bounds_db
            step = self.config.step_db if move == DIRECTION_UP else -self.config.step_db
            self._snr = min(hi, max(lo, self._snr + step))
            self._last_move = move

        if (
            len(self._reversals) >= self.config.max_reversals
            or len(self._trials) >= self.config.max_trials
        ):
            self._complete = True
        return record

    def threshold(self) -> ThresholdResult:
        """Mean reversal SNR (first reversal discarded) and resulting JND."""
        if not self._complete:
            raise NotCompleteError("staircase has not terminated yet")
        used = self._reversals[1:]
        if not used:
            return ThresholdResult(
                threshold_snr_db=None,
                jnd_db=None,
                n_reversals_used=0,
                valid=False,
            )
        t = sum(used) / len(used)
        return ThresholdResult(
            threshold_snr_db=t,
            jnd_db=self.config.reference_snr_db - t,
            n_reversals_used=len(used),
            valid=True,
        )

    def to_dict(self) -> dict:
        """Canonical session document; the trial log alone replays it."""
        return {
            "kind": "staircase",
            "config": self.config.to_dict(),
            "trials": [t.to_dict() for t in self._trials],
            "reversals_snr_db": list(self._reversals),
            "current_dynamic_snr_db": self._snr,
            "consecutive_correct": self._run_correct,
            "consecutive_incorrect": self._run_incorrect,
            "last_move_direction": self._last_move,
            "complete": self._complete,
        }

    @classmethod
    def replay(cls, config: StaircaseConfig, answers: Sequence[str]) -> "Staircase":
        session = cls(config)
        for answer in answers:
            session.submit_answer(answer)
        return session

    @classmethod
    def from_dict(cls, data: dict) -> "Staircase":
        """Rebuild by replaying the trial log; verifies stored snapshots."""
        config = StaircaseConfig.from_dict(data["config"])
        session = cls.replay(config, [t["answer"] for t in data["trials"]])
        snapshot = session.to_dict()
        for key in ("reversals_snr_db", "current_dynamic_snr_db", "complete"):
            if key in data and snapshot[key] != data[key]:
                raise ValueError(
                    f"stored session is inconsistent with its trial log ({key})"
                )
        return session
