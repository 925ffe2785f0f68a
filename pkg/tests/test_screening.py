import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jndq.screening import (
    Screening,
    ScreeningConfig,
    VERDICT_FAIL,
    VERDICT_PASS,
    VERDICT_PENDING,
    verdict_for,
)
from jndq.staircase import ConfigError
from jndq.trials import (
    ANSWER_FIRST,
    ANSWER_SECOND,
    NotCompleteError,
    SessionCompleteError,
)


def answer(session, correct: bool) -> None:
    spec = session.current_trial()
    if correct:
        session.submit_answer(spec.correct_answer)
    else:
        wrong = ANSWER_SECOND if spec.correct_answer == ANSWER_FIRST else ANSWER_FIRST
        session.submit_answer(wrong)


def run_session(pattern, jnd_level_db=10, acceptance_k=3, order_seed=0) -> Screening:
    session = Screening(
        ScreeningConfig(
            jnd_level_db=jnd_level_db, acceptance_k=acceptance_k, order_seed=order_seed
        )
    )
    for correct in pattern:
        answer(session, correct)
    return session


class TestConfig:
    def test_level_ten_renders_forty_db_dynamic(self):
        session = Screening(ScreeningConfig(jnd_level_db=10, order_seed=1))
        assert all(q.dynamic.snr_db == 40 for q in session.questions)
        assert all(q.reference.snr_db == 50 for q in session.questions)
        assert len(session.questions) == 4

    def test_level_sixteen_out_of_bounds(self):
        with pytest.raises(ConfigError):
            ScreeningConfig(jnd_level_db=16).validate()

    def test_level_zero_reaches_reference(self):
        with pytest.raises(ConfigError):
            ScreeningConfig(jnd_level_db=0).validate()

    def test_acceptance_k_bounds(self):
        with pytest.raises(ConfigError):
            ScreeningConfig(jnd_level_db=10, acceptance_k=0).validate()
        with pytest.raises(ConfigError):
            ScreeningConfig(jnd_level_db=10, acceptance_k=5).validate()

    def test_round_trips_through_dict(self):
        cfg = ScreeningConfig(jnd_level_db=8, acceptance_k=2, order_seed=77)
        assert ScreeningConfig.from_dict(cfg.to_dict()) == cfg


class TestQuestionLayout:
    def test_same_seed_same_questions(self):
        a = Screening(ScreeningConfig(jnd_level_db=10, order_seed=5))
        b = Screening(ScreeningConfig(jnd_level_db=10, order_seed=5))
        assert a.questions == b.questions

    def test_distinct_sources_when_four_available(self):
        session = Screening(ScreeningConfig(jnd_level_db=10, order_seed=6))
        sources = [q.reference.source_id for q in session.questions]
        assert len(set(sources)) == 4

    def test_fresh_noise_per_question(self):
        session = Screening(ScreeningConfig(jnd_level_db=10, order_seed=6))
        seeds = {q.dynamic.noise_seed for q in session.questions} | {
            q.reference.noise_seed for q in session.questions
        }
        assert len(seeds) == 8


class TestVerdicts:
    def test_three_of_four_passes_default(self):
        assert run_session([True, True, True, False]).final_verdict() == VERDICT_PASS

    def test_zero_correct_fails_any_k(self):
        for k in (1, 2, 3, 4):
            session = run_session([False] * 4, acceptance_k=k)
            assert session.final_verdict() == VERDICT_FAIL

    def test_same_answers_different_criterion(self):
        pattern = [True, True, False, False]
        assert run_session(pattern, acceptance_k=2).final_verdict() == VERDICT_PASS
        assert run_session(pattern, acceptance_k=3).final_verdict() == VERDICT_FAIL

    def test_four_correct_passes_all_k(self):
        for k in (1, 2, 3, 4):
            assert run_session([True] * 4, acceptance_k=k).final_verdict() == VERDICT_PASS

    def test_lenient_single_correct(self):
        session = run_session([True, False, False, False], acceptance_k=1)
        assert session.final_verdict() == VERDICT_PASS

    def test_strict_two_correct_fails(self):
        session = run_session([True, True, False, False], jnd_level_db=6, acceptance_k=3)
        assert session.final_verdict() == VERDICT_FAIL

    def test_pending_until_all_answered(self):
        session = run_session([True, True, True])
        assert session.verdict == VERDICT_PENDING
        with pytest.raises(NotCompleteError):
            session.final_verdict()
        answer(session, True)
        assert session.verdict == VERDICT_PASS

    def test_extra_answer_rejected(self):
        session = run_session([True] * 4)
        with pytest.raises(SessionCompleteError):
            session.submit_answer(ANSWER_FIRST)

    def test_regrade_is_pure(self):
        session = run_session([True, True, False, True], acceptance_k=4)
        assert session.final_verdict() == VERDICT_FAIL
        assert session.regrade(3) == VERDICT_PASS
        assert session.regrade(3) == VERDICT_PASS
        assert session.final_verdict() == VERDICT_FAIL  # unchanged

    @given(st.lists(st.booleans(), min_size=4, max_size=4))
    @settings(max_examples=50, deadline=None)
    def test_pass_monotone_non_increasing_in_k(self, pattern):
        session = run_session(pattern)
        passes = [session.regrade(k) == VERDICT_PASS for k in (1, 2, 3, 4)]
        # once failing, stays failing for stricter criteria
        assert all(a or not b for a, b in zip(passes, passes[1:]))

    def test_verdict_for_matches_rule(self):
        assert verdict_for(3, 3) == VERDICT_PASS
        assert verdict_for(2, 3) == VERDICT_FAIL


class TestSerialization:
    def test_round_trip(self):
        session = run_session([True, False, True, True], acceptance_k=2, order_seed=9)
        restored = Screening.from_dict(session.to_dict())
        assert restored.to_dict() == session.to_dict()
        assert restored.final_verdict() == session.final_verdict()

    def test_replay_from_answers(self):
        session = run_session([True, False, True])
        replayed = Screening.replay(
            session.config, [record.answer for record in session.answers]
        )
        assert replayed.to_dict() == session.to_dict()
