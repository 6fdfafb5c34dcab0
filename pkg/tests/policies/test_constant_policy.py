import numpy as np
import pytest

from environments.generators import make_synthetic_instance
from policies.base_policy import PolicyError
from policies.constant_policy import ConstantPolicy


class TestConstantPolicy:

    def test_plays_same_super_arm(self):
        policy = ConstantPolicy(make_synthetic_instance(T=10), np.random.default_rng(0), [3, 2])
        assert policy.super_arm == (2, 3)
        assert {policy.select(t) for t in range(1, 11)} == {(2, 3)}

    def test_rejects_infeasible_super_arm(self):
        with pytest.raises(PolicyError, match="not in the feasible family"):
            ConstantPolicy(make_synthetic_instance(T=10), np.random.default_rng(0), [0, 3])
