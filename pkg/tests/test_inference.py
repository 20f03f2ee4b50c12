import math

import numpy as np
import pytest

import oracle
from modelgen import factors_to_oracle, obs_to_oracle, random_model
from btai.inference import (
    EPS,
    Factor,
    ModelError,
    NoPoliciesError,
    bayesian_model_average,
    check_categorical,
    check_stochastic_matrix,
    expected_free_energy,
    policy_posterior,
    run_active_inference,
    safe_log,
    select_action,
    softmax,
    update_posterior_states,
    variational_free_energy,
)

B_G = np.array([[0.95, 0.9], [0.05, 0.1]])
I2 = np.eye(2)


class TestSafeLog:
    def test_one(self):
        assert safe_log(1.0) == 0.0

    def test_zero_clamps(self):
        assert safe_log(0.0) == pytest.approx(math.log(1e-16))

    def test_half(self):
        assert safe_log(0.5) == pytest.approx(-0.693147, abs=1e-6)

    def test_exact_above_eps(self):
        assert safe_log(EPS) == math.log(EPS)


class TestSoftmax:
    def test_symmetry(self):
        assert softmax([0.0, 0.0]) == pytest.approx([0.5, 0.5])

    def test_no_overflow(self):
        assert softmax([1000.0, 1000.0, 1000.0]) == pytest.approx([1 / 3] * 3)

    def test_inverts_log(self):
        assert softmax(np.log([0.9, 0.1])) == pytest.approx([0.9, 0.1])

    def test_shift_invariance(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            v = rng.normal(size=4)
            c = rng.normal() * 100
            assert softmax(v + c) == pytest.approx(softmax(v), abs=1e-12)


class TestValidation:
    def test_categorical_rejects_bad_sum(self):
        with pytest.raises(ModelError):
            check_categorical([0.5, 0.6])

    def test_categorical_rejects_negative(self):
        with pytest.raises(ModelError):
            check_categorical([-0.1, 1.1])

    def test_stochastic_checks_columns(self):
        with pytest.raises(ModelError):
            check_stochastic_matrix([[0.5, 0.2], [0.4, 0.8]])

    def test_stochastic_rejects_nonsquare(self):
        with pytest.raises(ModelError):
            check_stochastic_matrix([[1.0, 0.0]])


class TestUpdatePosteriorStates:
    def test_observed_miss_with_move_dynamics(self):
        s = update_posterior_states([B_G], I2, [0.5, 0.5], [[0.0, 1.0]])
        assert s[0][1] == pytest.approx(1.0, abs=1e-9)
        assert s[0][0] < 1e-12
        assert s[1] == pytest.approx([0.9, 0.1], abs=1e-6)

    def test_identity_preserves_delta(self):
        s = update_posterior_states([I2], I2, [1.0, 0.0], [[1.0, 0.0]])
        assert s[0] == pytest.approx([1.0, 0.0], abs=1e-9)
        assert s[1] == pytest.approx([1.0, 0.0], abs=1e-9)

    def test_no_evidence_stays_uniform(self):
        s = update_posterior_states([I2], I2, [0.5, 0.5], [None])
        assert s[0] == pytest.approx([0.5, 0.5])

    def test_dimension_mismatch(self):
        with pytest.raises(ModelError):
            update_posterior_states([B_G], I2, [0.5, 0.5], [[1.0, 0.0, 0.0]])

    def test_wrong_transition_count(self):
        with pytest.raises(ModelError):
            update_posterior_states([], I2, [0.5, 0.5], [[1.0, 0.0]], horizon=2)


class TestFreeEnergy:
    def test_perfect_fit_near_zero(self):
        delta = [1.0, 0.0]
        f = variational_free_energy([np.array(delta)], [], I2, delta, [[1.0, 0.0]])
        assert abs(f) < 1e-6

    def test_uniform_self_is_zero(self):
        f = variational_free_energy([np.full(2, 0.5)], [], I2, [0.5, 0.5], [None])
        assert f == pytest.approx(0.0, abs=1e-12)

    def test_matches_oracle_on_example_inputs(self):
        obs = [[0.0, 1.0]]
        s = update_posterior_states([B_G], I2, [0.5, 0.5], obs)
        f = variational_free_energy(s, [B_G], I2, [0.5, 0.5], obs)
        s_o = oracle.posterior_states([B_G.tolist()], I2.tolist(), [0.5, 0.5], obs)
        f_o = oracle.free_energy(s_o, [B_G.tolist()], I2.tolist(), [0.5, 0.5], obs)
        assert f == pytest.approx(f_o, abs=1e-9)


class TestExpectedFreeEnergy:
    def test_goal_progress_value(self):
        g = expected_free_energy([np.array([0.0, 1.0]), np.array([0.9, 0.1])],
                                 I2, [1.0, 0.0])
        assert g == pytest.approx(-1.2251, abs=1e-3)

    def test_idle_policy_value(self):
        g = expected_free_energy([np.array([0.0, 1.0]), np.array([1e-16, 1.0])],
                                 I2, [1.0, 0.0])
        assert g == pytest.approx(0.0, abs=1e-6)

    def test_matched_preferences_zero(self):
        s2 = np.array([0.3, 0.7])
        g = expected_free_energy([s2, s2], I2, safe_log(s2))
        assert g == pytest.approx(0.0, abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ModelError):
            expected_free_energy([np.full(2, 0.5)] * 2, I2, [1.0, 0.0, 0.0])


class TestPolicyPosterior:
    def test_symmetric(self):
        assert policy_posterior([0, 0], [0, 0]) == pytest.approx([0.5, 0.5])

    def test_example_gap(self):
        assert policy_posterior([0, 0], [-1.2251, 0]) == pytest.approx(
            [0.773, 0.227], abs=1e-3)

    def test_single(self):
        assert policy_posterior([3.0], [-1.0]) == pytest.approx([1.0])

    def test_empty(self):
        with pytest.raises(NoPoliciesError):
            policy_posterior([], [])


class TestBayesianModelAverage:
    def test_degenerate(self):
        out = bayesian_model_average([1.0, 0.0], [[0.9, 0.1], [0.2, 0.8]])
        assert out == pytest.approx([0.9, 0.1])

    def test_symmetric(self):
        out = bayesian_model_average([0.5, 0.5], [[1.0, 0.0], [0.0, 1.0]])
        assert out == pytest.approx([0.5, 0.5])

    def test_weighted(self):
        out = bayesian_model_average([0.773, 0.227],
                                     [[0.9, 0.1], [1e-16, 1.0 - 1e-16]])
        assert out == pytest.approx([0.6957, 0.3043], abs=1e-3)


class TestSelectAction:
    def test_argmax(self):
        assert select_action([0.7, 0.3], [("moveTo",), ("Idle",)]) == "moveTo"

    def test_pooled_tie_goes_to_first_declared(self):
        assert select_action([0.25, 0.25, 0.5],
                             [("a1",), ("a1",), ("a2",)]) == "a1"

    def test_single(self):
        assert select_action([1.0], [("Idle",)]) == "Idle"


def example1_factor(preferences=(1.0, 0.0), prior=(0.5, 0.5)):
    return Factor(likelihood=I2, transitions={"moveTo": B_G},
                  prior=np.array(prior), preferences=np.array(preferences))


class TestRunActiveInference:
    def test_example_goal_not_reached_chooses_move(self):
        out = run_active_inference({"g": example1_factor()},
                                   ["Idle", "moveTo"], {"g": [0.0, 1.0]})
        assert out.chosen_action == "moveTo"

    def test_goal_already_reached_chooses_idle(self):
        out = run_active_inference({"g": example1_factor()},
                                   ["Idle", "moveTo"], {"g": [1.0, 0.0]})
        assert out.chosen_action == "Idle"

    def test_indifferent_preferences_choose_idle(self):
        out = run_active_inference({"g": example1_factor(preferences=(0.0, 0.0))},
                                   ["Idle", "moveTo"], {"g": [0.0, 1.0]})
        assert out.chosen_action == "Idle"

    def test_no_actions(self):
        with pytest.raises(NoPoliciesError):
            run_active_inference({"g": example1_factor()}, [], {"g": None})

    def test_averaged_beliefs_consistent(self):
        out = run_active_inference({"g": example1_factor()},
                                   ["Idle", "moveTo"], {"g": [0.0, 1.0]})
        for t, avg in enumerate(out.averaged_beliefs["g"]):
            recomputed = bayesian_model_average(
                out.policy_probs,
                [out.per_policy_beliefs["g"][p][t]
                 for p in range(len(out.policies))])
            assert avg == pytest.approx(recomputed, abs=1e-9)

    def test_outputs_on_simplex(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            factors, actions, observations = random_model(rng)
            out = run_active_inference(factors, actions, observations)
            assert out.policy_probs.sum() == pytest.approx(1.0, abs=1e-9)
            for sid in factors:
                for beliefs in out.per_policy_beliefs[sid]:
                    for b in beliefs:
                        assert b.sum() == pytest.approx(1.0, abs=1e-9)

    def test_bitwise_determinism(self):
        rng = np.random.default_rng(5)
        factors, actions, observations = random_model(rng)
        a = run_active_inference(factors, actions, observations)
        b = run_active_inference(factors, actions, observations)
        assert a.chosen_action == b.chosen_action
        assert np.array_equal(a.policy_probs, b.policy_probs)
        assert np.array_equal(a.free_energy, b.free_energy)
        assert np.array_equal(a.expected_free_energy, b.expected_free_energy)


class TestOracleAgreement:
    def test_small_random_batch(self):
        rng = np.random.default_rng(42)
        for _ in range(30):
            factors, actions, observations = random_model(rng)
            out = run_active_inference(factors, actions, observations)
            f_o, g_o, pi_o, avg_o = oracle.evaluate_model(
                factors_to_oracle(factors), actions,
                obs_to_oracle(observations))
            assert out.free_energy == pytest.approx(f_o, abs=1e-9)
            assert out.expected_free_energy == pytest.approx(g_o, abs=1e-9)
            assert out.policy_probs == pytest.approx(pi_o, abs=1e-9)
            for sid in factors:
                for t, avg in enumerate(out.averaged_beliefs[sid]):
                    assert avg == pytest.approx(avg_o[sid][t], abs=1e-9)


class TestPreferenceMonotonicity:
    def test_raising_a_preference_never_hurts_its_policy(self):
        rng = np.random.default_rng(99)
        for _ in range(100):
            factors, actions, observations = random_model(rng, max_factors=1)
            (sid, fac), = factors.items()
            out = run_active_inference(factors, actions, observations)
            k = int(rng.integers(fac.m))
            # policy whose predicted outcome at the horizon favours k most
            masses = [fac.likelihood @ out.per_policy_beliefs[sid][p][-1]
                      for p in range(len(actions))]
            target = int(np.argmax([m[k] for m in masses]))
            bumped = dict(factors)
            c = np.array(fac.preferences, dtype=float)
            c[k] += float(rng.uniform(0.1, 2.0))
            bumped[sid] = Factor(likelihood=fac.likelihood,
                                 transitions=fac.transitions,
                                 prior=fac.prior, preferences=c)
            out2 = run_active_inference(bumped, actions, observations)
            assert out2.policy_probs[target] >= out.policy_probs[target] - 1e-12
