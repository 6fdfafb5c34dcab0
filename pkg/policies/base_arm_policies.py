import logging
from typing import List, Optional, Tuple

import numpy as np

from environments.environment import FeedbackRecord
from environments.instance import BanditInstance
from solvers.factory import solve

from .base_policy import EXPLORATION_SLACK, EXPLORATION_WEIGHT, WEIGHT_CLAMP, Policy
from .estimators import ArmHistory, sliding_ucb_index, window_posterior
from .super_arm_policies import SlidingWindowConfig, default_window

logger = logging.getLogger(__name__)


class BaseArmPolicy(Policy):
    """Policies that keep per-base-arm sliding windows and delegate to the family solver."""

    def __init__(self, instance: BanditInstance, rng: np.random.Generator, config: Optional[SlidingWindowConfig] = None,
                 horizon: Optional[int] = None):
        super().__init__(instance, rng)
        config = config or SlidingWindowConfig()
        self.window = config.window or default_window(horizon or instance.horizon)
        self.histories: List[ArmHistory] = [ArmHistory() for _ in range(self.num_arms)]

    def update(self, record: FeedbackRecord) -> None:
        for arm, outcome, _ in record.outcomes:
            self.histories[arm].append(min(max(outcome, 0.0), 1.0))


class SWCUCB(BaseArmPolicy):
    name = "sw-cucb"

    def weights(self, t: int) -> np.ndarray:
        w = np.empty(self.num_arms)
        for i, history in enumerate(self.histories):
            if history.count == 0:
                w[i] = EXPLORATION_WEIGHT
            else:
                w[i] = min(max(sliding_ucb_index(history, t, self.window), 0.0), WEIGHT_CLAMP)
        return w

    def select(self, t: int) -> Tuple[int, ...]:
        return solve(self.family, self.weights(t), slack=EXPLORATION_SLACK)


class SWCTS(BaseArmPolicy):
    """Per-arm Beta posteriors over the window; empty windows sample from the uniform prior."""

    name = "sw-cts"

    def select(self, t: int) -> Tuple[int, ...]:
        posteriors = np.array([window_posterior(history, self.window) for history in self.histories])
        theta = self.rng.beta(posteriors[:, 0], posteriors[:, 1])
        return solve(self.family, theta)
