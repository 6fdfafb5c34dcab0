import math

import numpy as np
import pytest

from environments.environment import FeedbackRecord, env_step
from environments.generators import make_kmax_counterexample, make_synthetic_instance, make_two_singletons
from policies.base_policy import PolicyError
from policies.estimators import CrucbConfig
from policies.super_arm_policies import SWTS, SWUCB, RedUCB, SlidingWindowConfig, default_window
from solvers.enumeration import EnumerationOverflowError

RISING = [min(1.0, 0.05 * n) for n in range(1, 101)]
STEADY = [0.6] * 100


def _play(instance, policy, horizon, rng):
    pulls = np.zeros(instance.num_arms, dtype=int)
    actions = []
    for t in range(1, horizon + 1):
        super_arm = policy.select(t)
        policy.update(env_step(instance, pulls, super_arm, t, rng))
        actions.append(super_arm)
    return actions, pulls


class TestDefaultWindow:

    @pytest.mark.parametrize("horizon, expected", [(1, 1), (2, 1), (100, 10), (20000, 141)])
    def test_rounded_square_root(self, horizon, expected):
        assert default_window(horizon) == expected


class TestRedUCB:

    def test_round_robin_until_two_observations(self):
        instance = make_two_singletons(RISING, STEADY)
        policy = RedUCB(instance, np.random.default_rng(0))
        actions, _ = _play(instance, policy, 4, np.random.default_rng(0))
        assert actions == [(0,), (1,), (0,), (1,)]

    def test_noise_scales_with_super_arm_size(self):
        instance = make_synthetic_instance(T=100, sigma=0.02)
        policy = RedUCB(instance, np.random.default_rng(0), CrucbConfig(sigma=0.02))
        assert policy.super_arms == [(0, 1), (2, 3)]
        assert [cfg.sigma for cfg in policy.configs] == [pytest.approx(0.02 * math.sqrt(2))] * 2

    def test_prefers_rising_super_arm(self):
        instance = make_two_singletons(RISING, STEADY)
        policy = RedUCB(instance, np.random.default_rng(0))
        actions, pulls = _play(instance, policy, 100, np.random.default_rng(0))
        assert pulls[0] > pulls[1]
        assert actions[-1] == (0,)

    def test_unknown_feedback(self):
        policy = RedUCB(make_two_singletons(RISING, STEADY), np.random.default_rng(0))
        with pytest.raises(PolicyError):
            policy.update(FeedbackRecord(t=1, super_arm=(0, 1), outcomes=((0, 0.1, 1), (1, 0.6, 1))))

    def test_enumeration_cap(self):
        instance = make_synthetic_instance(T=100)
        with pytest.raises(EnumerationOverflowError):
            RedUCB(instance, np.random.default_rng(0), enumeration_cap=1)


class TestSWUCB:

    def test_plays_each_super_arm_once_first(self):
        instance = make_synthetic_instance(T=100, sigma=0.0)
        policy = SWUCB(instance, np.random.default_rng(0))
        actions, _ = _play(instance, policy, 2, np.random.default_rng(0))
        assert actions == [(0, 1), (2, 3)]

    def test_window_from_horizon(self):
        instance = make_two_singletons(RISING, STEADY)
        assert SWUCB(instance, np.random.default_rng(0)).window == 10
        assert SWUCB(instance, np.random.default_rng(0), horizon=49).window == 7
        assert SWUCB(instance, np.random.default_rng(0), SlidingWindowConfig(window=3)).window == 3

    def test_rewards_are_aggregated(self):
        instance = make_synthetic_instance(T=100, sigma=0.0)
        policy = SWUCB(instance, np.random.default_rng(0))
        policy.update(FeedbackRecord(t=1, super_arm=(2, 3), outcomes=((2, 0.8, 1), (3, 0.8, 1))))
        assert policy.histories[1].total(1, 1) == pytest.approx(-0.4)


class TestSWTS:

    def test_minimize_rewards_rescaled_to_unit_interval(self):
        instance = make_synthetic_instance(T=100)
        policy = SWTS(instance, np.random.default_rng(0))
        assert (policy.low, policy.span) == (-3.0, 3.0)
        assert policy.transform_reward(-1.25) == pytest.approx(1.75 / 3)
        assert policy.transform_reward(-5.0) == 0.0

    def test_kmax_rewards_are_left_alone(self):
        policy = SWTS(make_kmax_counterexample(1000), np.random.default_rng(0))
        assert policy.transform_reward(0.7) == pytest.approx(0.7)

    def test_samples_from_window_posteriors(self, mocker):
        instance = make_two_singletons(RISING, STEADY)
        rng = mocker.Mock()
        rng.beta.return_value = np.array([0.2, 0.9])
        policy = SWTS(instance, rng, SlidingWindowConfig(window=2))
        policy.update(FeedbackRecord(t=1, super_arm=(0,), outcomes=((0, 1.0, 1),)))
        assert policy.select(2) == (1,)
        alphas, betas = rng.beta.call_args.args
        np.testing.assert_allclose(alphas, [2.0, 1.0])
        np.testing.assert_allclose(betas, [1.0, 1.0])
