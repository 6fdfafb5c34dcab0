import numpy as np
import pytest

from environments.generators import (
    ParameterError,
    build_from_generator,
    constrained_pair_parameters,
    list_generators,
    make_constrained_pair,
    make_kmax_counterexample,
    make_lower_bound_pair,
    make_synthetic_instance,
    make_two_singletons,
)
from environments.environment import env_step, super_arm_reward
from environments.instance import validate_instance


class TestSyntheticInstance:

    def test_late_bloomer_reaches_lb_end_at_horizon(self):
        instance = make_synthetic_instance(c=1.1, T=5000, lb_end=0.92, ep_level=0.8)
        roles = instance.metadata["roles"]
        late = instance.arms[roles.index("late")]
        early = instance.arms[roles.index("early")]
        assert late.mu(5000) == pytest.approx(0.92, abs=1e-9)
        assert late.mu(1) < early.mu(1) == 0.8
        assert late.is_concave()

    @pytest.mark.parametrize("graph", ["shortest_path", "spanning_tree", "matching"])
    def test_presets_are_valid(self, graph):
        instance = make_synthetic_instance(T=200, graph=graph)
        assert validate_instance(instance).valid
        assert instance.num_arms == len(instance.family.graph.edges)

    def test_custom_graph(self):
        graph = {"task": "spanning_tree", "nodes": 2, "edges": [(0, 1, "late"), (0, 1, "early")]}
        instance = make_synthetic_instance(T=100, graph=graph)
        assert instance.metadata["roles"] == ["late", "early"]
        assert instance.family.sense == "minimize"

    @pytest.mark.parametrize("kwargs", [
        {"c": 0},
        {"lb_start": 0.5, "lb_end": 0.4},
        {"ep_level": 1.5},
        {"graph": "hypercube"},
        {"graph": {"task": "spanning_tree", "nodes": 2, "edges": [(0, 1, "middle")]}},
    ])
    def test_bad_parameters(self, kwargs):
        with pytest.raises(ParameterError):
            make_synthetic_instance(T=100, **kwargs)


class TestLowerBoundPair:

    def test_pair_agrees_on_first_third(self):
        a, b = make_lower_bound_pair(T=9)
        rising_a, rising_b = a.arms[1], b.arms[1]
        np.testing.assert_allclose(rising_a.values[:3], rising_b.values[:3])
        assert rising_a.mu(6) == pytest.approx(1.0)
        assert rising_b.mu(9) == pytest.approx(0.5)
        assert rising_a.mu(4) > rising_b.mu(4)

    def test_replicated_family(self):
        instance = make_lower_bound_pair(T=30, L=2, variant="A")
        assert instance.family.subsets == [(0, 1), (0, 3), (1, 2), (2, 3)]
        assert validate_instance(instance).valid

    def test_rejects_tiny_horizon(self):
        with pytest.raises(ParameterError):
            make_lower_bound_pair(T=2)


class TestConstrainedPair:

    @pytest.mark.parametrize("c", [1.2, 1.5, 1.8])
    def test_balance_and_gap(self, c):
        T = 2000
        params = constrained_pair_parameters(T, c)
        assert 1 <= params["P"] < T
        assert 0 < params["epsilon"] < params["mu_P"]

        a, b = make_constrained_pair(T, c, variant="A"), make_constrained_pair(T, c, variant="B")
        P, level = params["P"], params["mu_P"] - params["epsilon"]
        steady, rising_a, rising_b = a.arms[0], a.arms[1], b.arms[1]

        gain_b = level * P - rising_b.cumulative(P)
        gain_a = rising_a.cumulative(T) - rising_a.cumulative(T - P) - level * P
        assert gain_b == pytest.approx(gain_a, abs=1e-9 * rising_a.cumulative(T))
        np.testing.assert_allclose(rising_a.values[:P], rising_b.values[:P])
        assert steady.mu(1) == pytest.approx(level)

    def test_increments_stay_in_envelope(self):
        instance = make_constrained_pair(1000, 1.5, variant="A")
        rising = instance.arms[1]
        n = np.arange(1, 1000, dtype=float)
        assert np.all(rising.increments <= (n + 2.0) ** -1.5 + 1e-15)
        assert validate_instance(instance).valid

    @pytest.mark.parametrize("c", [1.0, 2.0, 0.5])
    def test_exponent_out_of_range(self, c):
        with pytest.raises(ParameterError):
            constrained_pair_parameters(100, c)


class TestKmaxCounterexample:

    @staticmethod
    def _play(instance, schedule):
        pulls = np.zeros(instance.num_arms, dtype=int)
        rng = np.random.default_rng(0)
        total = 0.0
        for t, super_arm in enumerate(schedule, start=1):
            record = env_step(instance, pulls, super_arm, t, rng)
            total += super_arm_reward(instance, record.values)
        return total

    def test_switching_beats_best_constant(self):
        T = 10_000
        instance = make_kmax_counterexample(T)

        constant_01 = self._play(instance, [(0, 1)] * T)
        # One round of (1, 2) first, then (0, 1) for the rest.
        switching = self._play(instance, [(1, 2)] + [(0, 1)] * (T - 1))
        assert switching - constant_01 == pytest.approx(0.3, abs=1e-6)

    def test_requires_long_horizon(self):
        with pytest.raises(ParameterError):
            make_kmax_counterexample(999)


class TestCatalog:

    def test_list_generators(self):
        names = [info.name for info in list_generators()]
        assert names == ["synthetic", "lower-bound-pair", "constrained-pair", "kmax-counterexample", "two-singletons"]

    def test_build_from_generator(self):
        instance = build_from_generator("two-singletons", {"mu_a": [0.1, 0.2], "mu_b": [0.3, 0.3]})
        assert instance.horizon == 2

    def test_pair_generator_needs_variant(self):
        with pytest.raises(ParameterError, match="variant"):
            build_from_generator("lower-bound-pair", {"T": 30})

    def test_unknown_generator(self):
        with pytest.raises(ParameterError, match="Unknown generator"):
            build_from_generator("sine-wave", {})

    def test_unknown_parameter(self):
        with pytest.raises(ParameterError, match="Bad parameters"):
            build_from_generator("kmax-counterexample", {"T": 1000, "colour": "red"})

    def test_two_singletons_table_lengths(self):
        with pytest.raises(ParameterError):
            make_two_singletons([0.1], [0.1, 0.2])
