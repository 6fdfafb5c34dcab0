import numpy as np
import pytest

from environments.environment import FeedbackRecord, env_step
from environments.generators import make_lower_bound_pair, make_synthetic_instance, make_two_singletons
from environments.instance import BanditInstance, DagShortestPath, SuperArmFamily
from environments.rising_functions import Constant
from policies import crucb
from policies.base_policy import EXPLORATION_WEIGHT, WEIGHT_CLAMP
from policies.crucb import CRUCB
from policies.estimators import CrucbConfig
from services.experiment_service import simulate
from services.oracle_service import regret_curve


def _play(instance, policy, horizon, rng):
    pulls = np.zeros(instance.num_arms, dtype=int)
    actions = []
    for t in range(1, horizon + 1):
        super_arm = policy.select(t)
        policy.update(env_step(instance, pulls, super_arm, t, rng))
        actions.append(super_arm)
    return actions, pulls


class TestCRUCBWeights:

    def test_unexplored_arms_get_exploration_weight(self):
        instance = make_synthetic_instance(T=100)
        policy = CRUCB(instance, np.random.default_rng(0))
        np.testing.assert_allclose(policy.weights(1), [EXPLORATION_WEIGHT] * 4)

    def test_explored_weights_are_clamped(self):
        instance = make_synthetic_instance(T=100)
        policy = CRUCB(instance, np.random.default_rng(0), CrucbConfig(sigma=0.0))
        policy.update(FeedbackRecord(t=1, super_arm=(0, 1), outcomes=((0, 0.1, 1), (1, 0.5, 1))))
        policy.update(FeedbackRecord(t=2, super_arm=(0, 1), outcomes=((0, 0.9, 2), (1, 0.5, 2))))
        weights = policy.weights(10)
        # Arm 0 projects 0.9 + 8 * 0.8 far above the clamp; arm 1 stays flat.
        assert weights[0] == WEIGHT_CLAMP
        assert weights[1] == pytest.approx(0.5)
        assert weights[2] == weights[3] == EXPLORATION_WEIGHT

    def test_config_defaults_to_instance_noise(self):
        instance = make_synthetic_instance(T=100, sigma=0.05)
        assert CRUCB(instance, np.random.default_rng(0)).config.sigma == 0.05


class TestCRUCBPlay:

    def test_explores_every_arm_twice_first(self):
        instance = make_synthetic_instance(T=100, sigma=0.0)
        policy = CRUCB(instance, np.random.default_rng(0))
        actions, pulls = _play(instance, policy, 4, np.random.default_rng(0))
        assert actions == [(0, 1), (0, 1), (2, 3), (2, 3)]
        assert pulls.tolist() == [2, 2, 2, 2]

    def test_switches_to_rising_arm(self):
        instance = make_lower_bound_pair(T=300, variant="A")
        policy = CRUCB(instance, np.random.default_rng(0))
        actions, pulls = _play(instance, policy, 300, np.random.default_rng(0))
        # The projection t / 200 of the rising arm overtakes the constant 1/2 around t = 100.
        assert actions[2:4] == [(1,), (1,)]
        assert all(action == (0,) for action in actions[4:99])
        assert all(action == (1,) for action in actions[100:])
        assert pulls[1] in (202, 203)

    def test_noiseless_estimates_never_undershoot_concave_means(self, mocker):
        rng = np.random.default_rng(21)
        T = 1000
        for _ in range(20):
            tables = []
            for _ in range(2):
                increments = np.sort(rng.random(T))[::-1]
                mu = np.cumsum(increments)
                tables.append((mu / mu[-1] * rng.uniform(0.3, 1.0)).tolist())
            instance = make_two_singletons(tables[0], tables[1])
            policy = CRUCB(instance, np.random.default_rng(0))

            calls = []
            original = crucb.crucb_future_potential

            def recording(history, t, config, window=None):
                estimate = original(history, t, config, window)
                calls.append((policy.histories.index(history), t, estimate.mu_hat))
                return estimate

            mocker.patch("policies.crucb.crucb_future_potential", side_effect=recording)
            _play(instance, policy, T, np.random.default_rng(0))
            assert calls
            assert all(mu_hat >= tables[arm][t - 1] - 1e-9 for arm, t, mu_hat in calls)
            mocker.stopall()

    def test_actions_are_feasible_under_noise(self):
        instance = make_synthetic_instance(T=500, sigma=0.1, graph="matching")
        policy = CRUCB(instance, np.random.default_rng(3))
        actions, pulls = _play(instance, policy, 500, np.random.default_rng(3))
        assert len(actions) == 500
        assert pulls.sum() == 2 * 500


def _uneven_paths_instance(horizon):
    """Direct edge 0 (mean 0.5) against the two-edge path 1 -> 2 (mean 0.9 per edge)."""
    return BanditInstance(
        name="uneven-paths",
        arms=[Constant(value=0.5, horizon=horizon), Constant(value=0.9, horizon=horizon), Constant(value=0.9, horizon=horizon)],
        horizon=horizon,
        family=SuperArmFamily(sense="minimize", graph=DagShortestPath(nodes=3, sink=2, edges=[(0, 2), (0, 1), (1, 2)])),
    )


class TestCRUCBOnMinimizeGraphs:

    def test_longer_cheaper_path_wins(self):
        instance = _uneven_paths_instance(400)
        trace = simulate(instance, CRUCB(instance, np.random.default_rng(0)), 400, np.random.default_rng(0))
        # Two rounds per path while both are unexplored, then the cheaper path for good.
        assert trace.actions[:4] == [(1, 2), (1, 2), (0,), (0,)]
        assert set(trace.actions[4:]) == {(1, 2)}
        assert regret_curve(trace, instance).regret[-1] == pytest.approx(0.6, abs=1e-9)
