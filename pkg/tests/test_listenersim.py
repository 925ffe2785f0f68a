import math

import pytest

from jndq.listenersim import (
    CONVERGENCE_TARGET,
    LISTENER_PRESETS,
    PsychometricRangeError,
    SimulatedListener,
    convergence_point,
    preset_listener,
    run_staircase,
    screening_outcomes,
    simulate_screening,
    simulate_staircase,
)
from jndq.screening import ScreeningConfig
from jndq.staircase import StaircaseConfig
from jndq.trials import ANSWER_NOT_DETECTABLE, TrialSpec, make_trial_spec


def trial_with_delta(delta: int) -> TrialSpec:
    return make_trial_spec(1, 1, ("s",), 50, 50 - delta)


def closed_form_convergence(listener: SimulatedListener) -> float:
    """Independent inversion of the logistic psychometric function."""
    t = (CONVERGENCE_TARGET - listener.guess_rate) / (
        1.0 - listener.guess_rate - listener.lapse_rate
    )
    return listener.mu_db + listener.sigma_db * math.log(t / (1.0 - t))


class TestPsychometricFunction:
    def test_asymptote_is_one_minus_lapse(self):
        listener = SimulatedListener(mu_db=10, sigma_db=1, lapse_rate=0.05)
        assert listener.p_correct(1e9) == pytest.approx(0.95)

    def test_midpoint_value(self):
        listener = SimulatedListener(mu_db=10, sigma_db=2, guess_rate=0.5, lapse_rate=0.0)
        assert listener.p_correct(10) == pytest.approx(0.75)

    def test_monotone_non_decreasing(self):
        listener = SimulatedListener(mu_db=8, sigma_db=1.5)
        values = [listener.p_correct(d) for d in range(-5, 25)]
        assert all(a <= b for a, b in zip(values, values[1:]))

    def test_guess_plus_lapse_must_leave_range(self):
        with pytest.raises(ValueError):
            SimulatedListener(mu_db=10, guess_rate=0.5, lapse_rate=0.5)

    def test_hard_threshold_sigma_zero(self):
        listener = SimulatedListener(mu_db=10, sigma_db=0, lapse_rate=0.0)
        assert listener.p_correct(9.99) == 0.5
        assert listener.p_correct(10.01) == 1.0


class TestRespond:
    def test_empirical_rate_matches_closed_form(self):
        listener = SimulatedListener(mu_db=10, sigma_db=1, rng_seed=5)
        trial = trial_with_delta(11)
        expected = listener.p_correct(11)
        hits = sum(
            listener.respond(trial) == trial.correct_answer for _ in range(100_000)
        )
        assert hits / 100_000 == pytest.approx(expected, abs=0.01)

    def test_wrong_answers_split_between_nd_and_wrong_position(self):
        listener = SimulatedListener(mu_db=30, sigma_db=0.5, rng_seed=6)
        trial = trial_with_delta(5)  # nearly always wrong
        answers = [listener.respond(trial) for _ in range(20_000)]
        nd = sum(a == ANSWER_NOT_DETECTABLE for a in answers)
        wrong_pos = sum(
            a != ANSWER_NOT_DETECTABLE and a != trial.correct_answer for a in answers
        )
        assert nd / (nd + wrong_pos) == pytest.approx(0.5, abs=0.02)

    def test_deterministic_given_seed(self):
        a = SimulatedListener(mu_db=10, rng_seed=3)
        b = SimulatedListener(mu_db=10, rng_seed=3)
        trial = trial_with_delta(10)
        assert [a.respond(trial) for _ in range(50)] == [
            b.respond(trial) for _ in range(50)
        ]


class TestConvergencePoint:
    def test_matches_closed_form_inversion(self):
        listener = SimulatedListener(mu_db=10, sigma_db=1, guess_rate=0.5, lapse_rate=0.0)
        assert convergence_point(listener) == pytest.approx(
            closed_form_convergence(listener), abs=1e-6
        )
        # frozen from the closed form: 10 + ln(0.41421.../0.58578...)
        assert convergence_point(listener) == pytest.approx(9.6534264, abs=1e-5)

    def test_target_outside_range_rejected(self):
        listener = SimulatedListener(mu_db=10, guess_rate=0.70711, lapse_rate=0.0)
        with pytest.raises(PsychometricRangeError):
            convergence_point(listener)

    def test_translation_invariance(self):
        base = SimulatedListener(mu_db=10, sigma_db=1.3, lapse_rate=0.01)
        shifted = SimulatedListener(mu_db=12, sigma_db=1.3, lapse_rate=0.01)
        assert convergence_point(shifted) - convergence_point(base) == pytest.approx(
            2.0, abs=1e-6
        )

    def test_sigma_zero_converges_at_midpoint(self):
        listener = SimulatedListener(mu_db=9, sigma_db=0, lapse_rate=0.0)
        assert convergence_point(listener) == pytest.approx(9.0, abs=1e-6)


class TestSimulateStaircase:
    def test_hard_threshold_listener_brackets_midpoint(self):
        # Fully deterministic responder: always right below a 10 dB gap,
        # always wrong above it, so reversals quantize to {39, 40, 41}.
        listener = SimulatedListener(
            mu_db=10, sigma_db=0, guess_rate=0.0, lapse_rate=0.0, rng_seed=1
        )
        summary = simulate_staircase(listener, StaircaseConfig(order_seed=2), 25)
        assert summary.n_invalid == 0
        for result in summary.results:
            assert 9.0 <= result.jnd_db <= 11.0

    def test_never_detecting_listener_pins_at_floor(self):
        # p_correct ~ 0.5 everywhere: mostly wrong, dynamic sits at 35.
        listener = SimulatedListener(mu_db=1e9, sigma_db=1, lapse_rate=0.0, rng_seed=2)
        session = run_staircase(listener, StaircaseConfig(order_seed=3))
        assert max(t.dynamic_snr_db for t in session.trials) <= 38

    def test_mean_tracks_convergence_oracle(self):
        listener = SimulatedListener(mu_db=10, sigma_db=1, rng_seed=4)
        summary = simulate_staircase(listener, StaircaseConfig(order_seed=5), 500)
        assert summary.mean_jnd_db == pytest.approx(
            convergence_point(listener), abs=1.0
        )
        assert summary.sd_jnd_db <= 2.5

    def test_estimator_grid_against_oracle(self):
        # The approach from a 15 dB gap with only the first reversal
        # discarded biases estimates upward on shallow slopes; the bound
        # is 1 dB for sigma <= 1 and documented wider at sigma = 2.
        for mu in (6, 8, 10):
            for sigma, bound in ((0.5, 1.0), (1.0, 1.0), (2.0, 2.0)):
                listener = SimulatedListener(mu_db=mu, sigma_db=sigma, rng_seed=8)
                summary = simulate_staircase(
                    listener, StaircaseConfig(order_seed=9), 500
                )
                oracle = convergence_point(listener)
                assert summary.mean_jnd_db == pytest.approx(oracle, abs=bound), (
                    mu,
                    sigma,
                )

    def test_deterministic_under_fixed_seeds(self):
        listener = SimulatedListener(mu_db=9, sigma_db=1, rng_seed=11)
        a = simulate_staircase(listener, StaircaseConfig(order_seed=12), 20)
        b = simulate_staircase(listener, StaircaseConfig(order_seed=12), 20)
        assert a == b

    def test_rejects_zero_runs(self):
        listener = SimulatedListener(mu_db=9)
        with pytest.raises(ValueError):
            simulate_staircase(listener, StaircaseConfig(), 0)


class TestSimulateScreening:
    def test_perfect_listener_always_passes(self):
        listener = SimulatedListener(mu_db=0.0, sigma_db=0.1, lapse_rate=0.0, rng_seed=3)
        for k in (1, 2, 3, 4):
            rate = simulate_screening(
                listener,
                ScreeningConfig(jnd_level_db=10, acceptance_k=k, order_seed=4),
                500,
            )
            assert rate >= 0.99

    def test_pure_guesser_matches_binomial(self):
        # mu far above any level: p_correct = guess_rate = 0.5 everywhere.
        guesser = SimulatedListener(mu_db=1e9, sigma_db=1, lapse_rate=0.0, rng_seed=5)
        rate = simulate_screening(
            guesser, ScreeningConfig(jnd_level_db=10, acceptance_k=4, order_seed=6), 10_000
        )
        assert rate == pytest.approx(0.5**4, abs=0.01)

    def test_rates_ordered_by_level_for_each_criterion(self):
        listener = SimulatedListener(mu_db=8, sigma_db=2, rng_seed=7)
        outcomes = {
            level: screening_outcomes(
                listener,
                ScreeningConfig(jnd_level_db=level, order_seed=8),
                4000,
            )
            for level in (10, 8, 6)
        }
        for k in (1, 2, 3, 4):
            rates = {
                level: sum(1 for n in runs if n >= k) / len(runs)
                for level, runs in outcomes.items()
            }
            assert rates[10] >= rates[8] - 0.02
            assert rates[8] >= rates[6] - 0.02

    def test_presets_exist_and_are_ordered(self):
        silent = preset_listener("silent-headphone")
        noisy = preset_listener("noisy")
        speaker = preset_listener("loudspeaker")
        assert silent.mu_db < noisy.mu_db < speaker.mu_db
        assert set(LISTENER_PRESETS) == {"silent-headphone", "noisy", "loudspeaker"}
        with pytest.raises(KeyError):
            preset_listener("anechoic")
