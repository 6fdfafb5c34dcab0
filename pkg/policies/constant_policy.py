from typing import Sequence, Tuple

import numpy as np

from environments.environment import FeedbackRecord
from environments.instance import BanditInstance
from solvers.factory import is_feasible

from .base_policy import Policy, PolicyError


class ConstantPolicy(Policy):
    """Plays one fixed super arm every round."""

    name = "constant"

    def __init__(self, instance: BanditInstance, rng: np.random.Generator, super_arm: Sequence[int]):
        super().__init__(instance, rng)
        self.super_arm = tuple(sorted(super_arm))
        if not is_feasible(self.family, self.super_arm):
            raise PolicyError(f"Super arm {list(self.super_arm)} is not in the feasible family.")

    def select(self, t: int) -> Tuple[int, ...]:
        return self.super_arm

    def update(self, record: FeedbackRecord) -> None:
        pass
