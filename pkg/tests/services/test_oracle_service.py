import itertools

import numpy as np
import pytest

from environments.environment import RunTrace
from environments.generators import (
    make_kmax_counterexample,
    make_lower_bound_pair,
    make_synthetic_instance,
    make_two_singletons,
)
from environments.instance import BanditInstance, SuperArmFamily
from environments.rising_functions import Constant, PiecewiseLinearSaturating, Tabulated
from policies.constant_policy import ConstantPolicy
from services import oracle_service
from services.experiment_service import simulate

MU_A = [0.1, 0.2, 0.3, 0.4]
MU_B = [0.7, 0.7, 0.7, 0.7]


def _random_concave_table(rng, T):
    increments = np.sort(rng.random(T))[::-1]
    mu = np.cumsum(increments)
    return (mu / mu[-1] * rng.uniform(0.1, 1.0)).tolist()


def _constant_trace(instance, super_arm, horizon):
    policy = ConstantPolicy(instance, np.random.default_rng(0), super_arm)
    return simulate(instance, policy, horizon, np.random.default_rng(0))


class TestOracleSuperArm:

    def test_two_singletons(self):
        result = oracle_service.oracle_super_arm(make_two_singletons(MU_A, MU_B), 4)
        assert result.super_arm == (1,)
        assert result.value == pytest.approx(2.8)
        assert result.method == "enumeration"

    def test_minimize_family_uses_negated_costs(self):
        instance = make_synthetic_instance(T=100, ep_level=0.8)
        result = oracle_service.oracle_super_arm(instance, 10)
        assert result.super_arm == (2, 3)
        assert result.value == pytest.approx(2 * (0.8 - 1.0) * 10)

    def test_solver_fallback_agrees_with_enumeration(self, caplog):
        instance = make_synthetic_instance(T=20000)
        with caplog.at_level("INFO"):
            fallback = oracle_service.oracle_super_arm(instance, 20000, enumeration_cap=1)
        exact = oracle_service.oracle_super_arm(instance, 20000)
        assert fallback.method == "solver"
        assert "Falling back" in caplog.text
        assert fallback.super_arm == exact.super_arm == (0, 1)
        assert fallback.value == pytest.approx(exact.value)

    def test_kmax_needs_enumeration(self):
        with pytest.raises(oracle_service.OracleError, match="K-max"):
            oracle_service.oracle_super_arm(make_kmax_counterexample(1000), 10, enumeration_cap=1)

    @pytest.mark.parametrize("t", [0, 5])
    def test_horizon_out_of_range(self, t):
        with pytest.raises(oracle_service.OracleError):
            oracle_service.oracle_super_arm(make_two_singletons(MU_A, MU_B), t)


class TestOracleCurve:

    def test_each_prefix_has_its_own_oracle(self):
        instance = make_two_singletons([0.1, 0.6, 0.9, 1.0], [0.5, 0.5, 0.5, 0.5])
        curve = oracle_service.oracle_curve(instance, 4)
        np.testing.assert_allclose(curve, [0.5, 1.0, 1.6, 2.6])
        assert oracle_service.oracle_schedule(instance, 4) == [(1, (1,)), (3, (0,))]

    def test_matches_pointwise_oracle(self):
        instance = make_synthetic_instance(T=300, graph="spanning_tree")
        curve = oracle_service.oracle_curve(instance, 300)
        for t in (1, 50, 299, 300):
            assert curve[t - 1] == pytest.approx(oracle_service.oracle_super_arm(instance, t).value)

    def test_chunking_gives_same_curve(self, mocker):
        instance = make_synthetic_instance(T=200, graph="matching")
        whole = oracle_service.oracle_curve(instance, 200)
        mocker.patch.object(oracle_service, "CHUNK_ELEMENTS", 1)
        np.testing.assert_allclose(oracle_service.oracle_curve(instance, 200), whole)


class TestRegretDip:

    def test_oracle_switches_once_and_early_peakers_lose_late(self):
        instance = make_synthetic_instance(c=1.1, T=20000, lb_end=0.92, ep_level=0.8, sigma=0.01)
        schedule = oracle_service.oracle_schedule(instance, 20000)
        assert [arm for _, arm in schedule] == [(2, 3), (0, 1)]
        crossover = schedule[1][0]
        assert 5000 <= crossover <= 8500

        trace = _constant_trace(instance, (2, 3), 20000)
        curve = oracle_service.regret_curve(trace, instance)
        np.testing.assert_allclose(curve.regret[: crossover - 1], 0.0, atol=1e-6)
        assert curve.regret[-1] > 1.0
        # Regret of the switching oracle path rises late and shrinks before T.
        late_path = oracle_service.regret_curve(_constant_trace(instance, (0, 1), 20000), instance)
        assert late_path.regret.max() > 0
        assert late_path.regret[-1] == pytest.approx(0.0, abs=1e-6)


class TestRegretCurve:

    def test_frame_columns(self):
        instance = make_two_singletons(MU_A, MU_B)
        curve = oracle_service.regret_curve(_constant_trace(instance, (0,), 4), instance)
        frame = curve.to_frame()
        assert list(frame.columns) == ["t", "expected_reward", "cum_reward", "oracle_cum", "regret"]
        np.testing.assert_allclose(frame["regret"], [0.6, 1.1, 1.5, 1.8])

    def test_sampled_rewards(self):
        instance = make_two_singletons(MU_A, MU_B)
        trace = _constant_trace(instance, (1,), 4)
        trace.sampled_rewards = [0.0, 0.0, 0.0, 0.0]
        curve = oracle_service.regret_curve(trace, instance, sampled=True)
        np.testing.assert_allclose(curve.regret, [0.7, 1.4, 2.1, 2.8])

    def test_recorded_rewards_must_match(self):
        instance = make_two_singletons(MU_A, MU_B)
        trace = _constant_trace(instance, (0,), 4)
        trace.expected_rewards[2] += 0.1
        with pytest.raises(oracle_service.TraceMismatchError, match="differ"):
            oracle_service.regret_curve(trace, instance)

    def test_final_pulls_must_match(self):
        instance = make_two_singletons(MU_A, MU_B)
        trace = _constant_trace(instance, (0,), 4)
        trace.final_pulls = [3, 1]
        with pytest.raises(oracle_service.TraceMismatchError, match="Final pull counts"):
            oracle_service.regret_curve(trace, instance)

    def test_infeasible_action(self):
        instance = make_two_singletons(MU_A, MU_B)
        trace = RunTrace(instance_name=instance.name, policy="manual", seed=0, actions=[(0, 1)])
        with pytest.raises(oracle_service.TraceMismatchError, match="not a feasible"):
            oracle_service.regret_curve(trace, instance)


class TestBruteForce:

    def test_constant_is_optimal_on_random_additive_instances(self, caplog):
        rng = np.random.default_rng(17)
        for _ in range(120):
            K = int(rng.integers(1, 5))
            T = int(rng.integers(1, 9))
            all_subsets = [c for r in range(1, K + 1) for c in itertools.combinations(range(K), r)]
            picks = rng.choice(len(all_subsets), size=min(len(all_subsets), int(rng.integers(1, 5))), replace=False)
            instance = BanditInstance(
                arms=[Tabulated(table=_random_concave_table(rng, T)) for _ in range(K)],
                horizon=T,
                family=SuperArmFamily(subsets=sorted(all_subsets[k] for k in picks)),
            )
            result = oracle_service.brute_force_optimal(instance, T)
            assert result.constant_is_optimal
            assert result.best_value == pytest.approx(result.best_constant_value, abs=1e-12)
        assert "No constant super arm" not in caplog.text

    def test_kmax_switching_beats_constants(self):
        T = 10
        instance = BanditInstance(
            name="kmax-small",
            arms=[
                PiecewiseLinearSaturating(slope=0.125, plateau=1.0, horizon=T),
                PiecewiseLinearSaturating(slope=0.1, kink=1, plateau=0.9, horizon=T),
                Constant(value=0.5, horizon=T),
            ],
            horizon=T,
            family=SuperArmFamily(reward="kmax", subsets=[(0, 1), (0, 2), (1, 2)]),
        )
        result = oracle_service.brute_force_optimal(instance, T)
        assert result.best_constant == (1, 2)
        assert result.best_constant_value == pytest.approx(8.6)
        assert result.best_value >= 8.8 - 1e-9
        assert not result.constant_is_optimal

    def test_lower_bound_pair_optimum(self):
        instance = make_lower_bound_pair(T=9, variant="A")
        result = oracle_service.brute_force_optimal(instance, 9)
        assert result.best_constant == (1,)
        assert result.best_constant_value == pytest.approx(6.5)
        assert result.constant_is_optimal

    def test_limits(self):
        with pytest.raises(oracle_service.OracleError):
            oracle_service.brute_force_optimal(make_synthetic_instance(T=100), 11)
