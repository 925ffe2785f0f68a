"""Shared 3AFC pair-comparison types and the seeded presentation stream.

A trial presents two renditions of the same source utterance: a reference
at the top SNR and a dynamic stimulus at a lower SNR. The listener picks
which sounded better or declares the difference not detectable. Choosing
the reference's position is the only correct answer; "not detectable"
always grades as incorrect so an unsure listener cannot stall an adaptive
procedure.

Presentation order (which position hides the reference) and the source
rotation are drawn from a deterministic stream keyed on the session's
order seed, so any session can be replayed or audited bit-for-bit.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from .seeds import derive_seed

ANSWER_FIRST = "first_better"
ANSWER_SECOND = "second_better"
ANSWER_NOT_DETECTABLE = "not_detectable"
ANSWERS = (ANSWER_FIRST, ANSWER_SECOND, ANSWER_NOT_DETECTABLE)

DEFAULT_SOURCE_IDS = ("female1", "female2", "male1", "male2")


class SessionCompleteError(Exception):
    """The session has terminated; no further trials or answers."""


class NotCompleteError(Exception):
    """Result requested before the session terminated."""


@dataclass(frozen=True)
class StimulusSpec:
    """Everything needed to render one stimulus deterministically."""

    source_id: str
    snr_db: int
    noise_seed: int


@dataclass(frozen=True)
class TrialSpec:
    """One pair comparison: reference vs dynamic, in presentation order."""

    trial_index: int
    reference_position: int  # 1 or 2: where in the pair the reference plays
    reference: StimulusSpec
    dynamic: StimulusSpec

    @property
    def first(self) -> StimulusSpec:
        return self.reference if self.reference_position == 1 else self.dynamic

    @property
    def second(self) -> StimulusSpec:
        return self.dynamic if self.reference_position == 1 else self.reference

    @property
    def delta_snr_db(self) -> int:
        return self.reference.snr_db - self.dynamic.snr_db

    @property
    def correct_answer(self) -> str:
        return ANSWER_FIRST if self.reference_position == 1 else ANSWER_SECOND


@dataclass(frozen=True)
class TrialRecord:
    """An answered trial, as kept in the session log."""

    trial_index: int
    dynamic_snr_db: int
    reference_position: int
    answer: str
    correct: bool

    def to_dict(self) -> dict:
        return {
            "trial_index": self.trial_index,
            "dynamic_snr_db": self.dynamic_snr_db,
            "reference_position": self.reference_position,
            "answer": self.answer,
            "correct": self.correct,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrialRecord":
        return cls(
            trial_index=int(data["trial_index"]),
            dynamic_snr_db=int(data["dynamic_snr_db"]),
            reference_position=int(data["reference_position"]),
            answer=str(data["answer"]),
            correct=bool(data["correct"]),
        )


def grade(spec: TrialSpec, answer: str) -> bool:
    """True iff the answer picks the stimulus in the reference position."""
    if answer not in ANSWERS:
        raise ValueError(f"unknown answer {answer!r}, expected one of {ANSWERS}")
    return answer == spec.correct_answer


def source_rotation(order_seed: int, source_ids: Sequence[str]) -> tuple[str, ...]:
    """Seeded shuffle of the source utterances; trials walk it cyclically,
    so runs of len(source_ids) trials use distinct sources."""
    if not source_ids:
        raise ValueError("need at least one source id")
    rng = random.Random(derive_seed(order_seed, "source-rotation"))
    rotation = list(source_ids)
    rng.shuffle(rotation)
    return tuple(rotation)


def make_trial_spec(
    order_seed: int,
    trial_index: int,
    source_ids: Sequence[str],
    reference_snr_db: int,
    dynamic_snr_db: int,
) -> TrialSpec:
    """Deterministic trial layout for a given session seed and index.

    Reference and dynamic stimuli share the source utterance but carry
    independent noise seeds, so the reference never reveals itself through
    a shared noise signature.
    """
    rotation = source_rotation(order_seed, source_ids)
    source_id = rotation[(trial_index - 1) % len(rotation)]
    rng = random.Random(derive_seed(order_seed, "order", trial_index))
    position = rng.choice((1, 2))
    return TrialSpec(
        trial_index=trial_index,
        reference_position=position,
        reference=StimulusSpec(
            source_id=source_id,
            snr_db=reference_snr_db,
            noise_seed=derive_seed(order_seed, "noise", trial_index, "reference"),
        ),
        dynamic=StimulusSpec(
            source_id=source_id,
            snr_db=dynamic_snr_db,
            noise_seed=derive_seed(order_seed, "noise", trial_index, "dynamic"),
        ),
    )
