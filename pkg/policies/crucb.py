import logging
from typing import List, Optional, Tuple

import numpy as np

from environments.environment import FeedbackRecord
from environments.instance import BanditInstance
from solvers.factory import solve

from .base_policy import EXPLORATION_SLACK, EXPLORATION_WEIGHT, WEIGHT_CLAMP, Policy
from .estimators import ArmHistory, CrucbConfig, crucb_future_potential

logger = logging.getLogger(__name__)


class CRUCB(Policy):
    """
    Combinatorial rising UCB.

    Each base arm gets the optimistic future-potential weight mu_acute at the
    current round; arms with fewer than two observations get the exploration
    weight. The super arm is whatever the family's solver picks for those weights.
    """

    name = "crucb"

    def __init__(self, instance: BanditInstance, rng: np.random.Generator, config: Optional[CrucbConfig] = None):
        super().__init__(instance, rng)
        self.config = config or CrucbConfig(sigma=instance.sigma)
        self.histories: List[ArmHistory] = [ArmHistory() for _ in range(self.num_arms)]
        logger.debug(f"CRUCB with epsilon={self.config.epsilon}, sigma={self.config.sigma}")

    def weights(self, t: int) -> np.ndarray:
        w = np.empty(self.num_arms)
        for i, history in enumerate(self.histories):
            if history.count < 2:
                w[i] = EXPLORATION_WEIGHT
            else:
                estimate = crucb_future_potential(history, t, self.config)
                w[i] = min(max(estimate.mu_acute, 0.0), WEIGHT_CLAMP)
        return w

    def select(self, t: int) -> Tuple[int, ...]:
        return solve(self.family, self.weights(t), slack=EXPLORATION_SLACK)

    def update(self, record: FeedbackRecord) -> None:
        for arm, outcome, _ in record.outcomes:
            self.histories[arm].append(outcome)
