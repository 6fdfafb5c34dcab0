import logging
import math
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from environments.environment import FeedbackRecord, super_arm_reward
from environments.instance import BanditInstance
from solvers.enumeration import DEFAULT_ENUMERATION_CAP, enumerate_super_arms

from .base_policy import Policy, PolicyError
from .estimators import ArmHistory, CrucbConfig, crucb_future_potential, sliding_ucb_index, window_posterior

logger = logging.getLogger(__name__)


class SlidingWindowConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    window: Optional[int] = Field(default=None, ge=1)


def default_window(horizon: int) -> int:
    """round(sqrt(T)), at least 1."""
    return max(1, int(round(math.sqrt(horizon))))


class SuperArmPolicy(Policy):
    """
    Base class for policies that treat every feasible super arm as one independent arm.

    The family is enumerated once up front; each super arm keeps the history of
    its aggregated rewards.
    """

    def __init__(self, instance: BanditInstance, rng: np.random.Generator, enumeration_cap: int = DEFAULT_ENUMERATION_CAP):
        super().__init__(instance, rng)
        self.super_arms: List[Tuple[int, ...]] = enumerate_super_arms(instance.family, enumeration_cap)
        self.index_of = {arm: k for k, arm in enumerate(self.super_arms)}
        self.histories: List[ArmHistory] = [ArmHistory() for _ in self.super_arms]
        logger.debug(f"{self.name}: tracking {len(self.super_arms)} super arms")

    def update(self, record: FeedbackRecord) -> None:
        k = self.index_of.get(record.super_arm)
        if k is None:
            raise PolicyError(f"Feedback for unknown super arm {list(record.super_arm)}")
        self.histories[k].append(self.transform_reward(super_arm_reward(self.instance, record.values)))

    def transform_reward(self, reward: float) -> float:
        return reward

    def first_with_fewer_than(self, pulls: int) -> Optional[int]:
        pending = [(h.count, k) for k, h in enumerate(self.histories) if h.count < pulls]
        return min(pending)[1] if pending else None


class RedUCB(SuperArmPolicy):
    """Rising estimator applied per super arm; noise scales as sigma * sqrt(|S|)."""

    name = "red-ucb"

    def __init__(self, instance: BanditInstance, rng: np.random.Generator, config: Optional[CrucbConfig] = None,
                 enumeration_cap: int = DEFAULT_ENUMERATION_CAP):
        super().__init__(instance, rng, enumeration_cap)
        base = config or CrucbConfig(sigma=instance.sigma)
        self.configs = [
            CrucbConfig(epsilon=base.epsilon, sigma=base.sigma * math.sqrt(len(arm))) for arm in self.super_arms
        ]

    def select(self, t: int) -> Tuple[int, ...]:
        # Round robin until every super arm has the two observations the estimator needs.
        pending = self.first_with_fewer_than(2)
        if pending is not None:
            return self.super_arms[pending]
        scores = [
            crucb_future_potential(history, t, cfg).mu_acute
            for history, cfg in zip(self.histories, self.configs)
        ]
        return self.super_arms[int(np.argmax(scores))]


class SWUCB(SuperArmPolicy):
    name = "sw-ucb"

    def __init__(self, instance: BanditInstance, rng: np.random.Generator, config: Optional[SlidingWindowConfig] = None,
                 enumeration_cap: int = DEFAULT_ENUMERATION_CAP, horizon: Optional[int] = None):
        super().__init__(instance, rng, enumeration_cap)
        config = config or SlidingWindowConfig()
        self.window = config.window or default_window(horizon or instance.horizon)

    def select(self, t: int) -> Tuple[int, ...]:
        pending = self.first_with_fewer_than(1)
        if pending is not None:
            return self.super_arms[pending]
        scores = [sliding_ucb_index(history, t, self.window) for history in self.histories]
        return self.super_arms[int(np.argmax(scores))]


class SWTS(SuperArmPolicy):
    """Sliding-window Thompson sampling on rewards rescaled to [0, 1]."""

    name = "sw-ts"

    def __init__(self, instance: BanditInstance, rng: np.random.Generator, config: Optional[SlidingWindowConfig] = None,
                 enumeration_cap: int = DEFAULT_ENUMERATION_CAP, horizon: Optional[int] = None):
        super().__init__(instance, rng, enumeration_cap)
        config = config or SlidingWindowConfig()
        self.window = config.window or default_window(horizon or instance.horizon)
        if instance.family.reward == "kmax":
            self.low, self.span = 0.0, 1.0
        else:
            size = max(1, instance.max_size)
            self.low = -float(size) if instance.family.sense == "minimize" else 0.0
            self.span = float(size)

    def transform_reward(self, reward: float) -> float:
        return min(max((reward - self.low) / self.span, 0.0), 1.0)

    def select(self, t: int) -> Tuple[int, ...]:
        posteriors = np.array([window_posterior(history, self.window) for history in self.histories])
        samples = self.rng.beta(posteriors[:, 0], posteriors[:, 1])
        return self.super_arms[int(np.argmax(samples))]
