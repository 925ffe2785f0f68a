"""Four-question fixed-level screening variant of the staircase test.

A full adaptive session is too long for a crowdsourcing task, so remote
listeners instead judge four pairs rendered at one target JND level
(dynamic SNR = reference - jnd_level_db) and pass when they answer at
least acceptance_k of the four correctly. The verdict is computed only
after all four answers, so a recorded session can be re-graded under any
criterion without new data. Passing or failing is a label, not a gate:
whether a failing listener may continue to the rating task is a policy
decision made by the hosting experiment.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from .staircase import ConfigError
from .trials import (
    ANSWERS,
    DEFAULT_SOURCE_IDS,
    NotCompleteError,
    SessionCompleteError,
    TrialRecord,
    TrialSpec,
    make_trial_spec,
)

VERDICT_PENDING = "pending"
VERDICT_PASS = "pass"
VERDICT_FAIL = "fail"

SCREENING_LEVELS_DB = (10, 8, 6)


@dataclass(frozen=True)
class ScreeningConfig:
    """Fixed-level screening parameters.

    jnd_level_db is the audible gap under test; all questions render the
    dynamic stimulus at reference_snr_db - jnd_level_db.
    """

    jnd_level_db: int
    n_questions: int = 4
    acceptance_k: int = 3
    reference_snr_db: int = 50
    dynamic_bounds_db: tuple[int, int] = (35, 49)
    order_seed: int = 0
    source_ids: tuple[str, ...] = DEFAULT_SOURCE_IDS

    @property
    def dynamic_snr_db(self) -> int:
        return self.reference_snr_db - self.jnd_level_db

    def validate(self) -> None:
        lo, hi = self.dynamic_bounds_db
        if not lo <= self.dynamic_snr_db <= hi:
            raise ConfigError(
                f"JND level {self.jnd_level_db} dB puts the dynamic stimulus at "
                f"{self.dynamic_snr_db} dB, outside [{lo}, {hi}]"
            )
        if self.n_questions < 1:
            raise ConfigError("n_questions must be at least 1")
        if not 1 <= self.acceptance_k <= self.n_questions:
            raise ConfigError(
                f"acceptance_k {self.acceptance_k} outside 1..{self.n_questions}"
            )
        if not self.source_ids:
            raise ConfigError("source_ids must not be empty")

    def to_dict(self) -> dict:
        return {
            "jnd_level_db": self.jnd_level_db,
            "n_questions": self.n_questions,
            "acceptance_k": self.acceptance_k,
            "reference_snr_db": self.reference_snr_db,
            "dynamic_bounds_db": list(self.dynamic_bounds_db),
            "order_seed": self.order_seed,
            "source_ids": list(self.source_ids),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScreeningConfig":
        return cls(
            jnd_level_db=int(data["jnd_level_db"]),
            n_questions=int(data["n_questions"]),
            acceptance_k=int(data["acceptance_k"]),
            reference_snr_db=int(data["reference_snr_db"]),
            dynamic_bounds_db=tuple(int(v) for v in data["dynamic_bounds_db"]),
            order_seed=int(data["order_seed"]),
            source_ids=tuple(str(s) for s in data["source_ids"]),
        )

    def with_order_seed(self, order_seed: int) -> "ScreeningConfig":
        return replace(self, order_seed=order_seed)


def verdict_for(n_correct: int, acceptance_k: int) -> str:
    """Pure grading rule; supports re-grading recorded sessions."""
    return VERDICT_PASS if n_correct >= acceptance_k else VERDICT_FAIL


class Screening:
    """Single-writer screening session over n_questions fixed-level pairs."""

    def __init__(self, config: ScreeningConfig):
        config.validate()
        self.config = config
        self.questions: tuple[TrialSpec, ...] = tuple(
            make_trial_spec(
                config.order_seed,
                index,
                config.source_ids,
                config.reference_snr_db,
                config.dynamic_snr_db,
            )
            for index in range(1, config.n_questions + 1)
        )
        self._answers: list[TrialRecord] = []

    @property
    def answers(self) -> tuple[TrialRecord, ...]:
        return tuple(self._answers)

    @property
    def is_complete(self) -> bool:
        return len(self._answers) >= self.config.n_questions

    @property
    def n_correct(self) -> int:
        return sum(1 for record in self._answers if record.correct)

    @property
    def verdict(self) -> str:
        if not self.is_complete:
            return VERDICT_PENDING
        return verdict_for(self.n_correct, self.config.acceptance_k)

    def current_trial(self) -> TrialSpec:
        if self.is_complete:
            raise SessionCompleteError("all screening questions answered")
        return self.questions[len(self._answers)]

    def submit_answer(self, answer: str) -> TrialRecord:
        if self.is_complete:
            raise SessionCompleteError("all screening questions answered")
        if answer not in ANSWERS:
            raise ValueError(f"unknown answer {answer!r}, expected one of {ANSWERS}")
        spec = self.current_trial()
        record = TrialRecord(
            trial_index=spec.trial_index,
            dynamic_snr_db=spec.dynamic.snr_db,
            reference_position=spec.reference_position,
            answer=answer,
            correct=answer == spec.correct_answer,
        )
        self._answers.append(record)
        return record

    def final_verdict(self) -> str:
        if not self.is_complete:
            raise NotCompleteError(
                f"only {len(self._answers)}/{self.config.n_questions} answered"
            )
        return self.verdict

    def regrade(self, acceptance_k: int) -> str:
        """Verdict this session would get under a different criterion."""
        if not 1 <= acceptance_k <= self.config.n_questions:
            raise ConfigError(
                f"acceptance_k {acceptance_k} outside 1..{self.config.n_questions}"
            )
        if not self.is_complete:
            raise NotCompleteError("cannot grade an unfinished session")
        return verdict_for(self.n_correct, acceptance_k)

    def to_dict(self) -> dict:
        return {
            "kind": "screening",
            "config": self.config.to_dict(),
            "trials": [record.to_dict() for record in self._answers],
            "verdict": self.verdict,
        }

    @classmethod
    def replay(cls, config: ScreeningConfig, answers: Sequence[str]) -> "Screening":
        session = cls(config)
        for answer in answers:
            session.submit_answer(answer)
        return session

    @classmethod
    def from_dict(cls, data: dict) -> "Screening":
        config = ScreeningConfig.from_dict(data["config"])
        session = cls.replay(config, [t["answer"] for t in data["trials"]])
        if "verdict" in data and session.verdict != data["verdict"]:
            raise ValueError("stored verdict is inconsistent with the answer log")
        return session
