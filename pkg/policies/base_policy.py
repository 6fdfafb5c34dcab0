from abc import ABC, abstractmethod
from typing import Tuple

import numpy as np

from environments.environment import FeedbackRecord
from environments.instance import BanditInstance


class PolicyError(ValueError):
    """Custom exception for policy configuration or state errors."""
    pass


# Weight given to arms without enough history; strictly above any clamped estimate.
EXPLORATION_WEIGHT = 3.0
# Explored weights are clamped to [0, WEIGHT_CLAMP].
WEIGHT_CLAMP = 2.0
# Solver slack so minimize families keep the full [0, EXPLORATION_WEIGHT] weight range.
EXPLORATION_SLACK = EXPLORATION_WEIGHT - 1.0


class Policy(ABC):
    """
    Abstract base class for bandit policies.

    A policy sees the instance structure (family, horizon, noise level) at
    construction and afterwards only the semi-bandit feedback it is given.
    """

    name: str = "policy"

    def __init__(self, instance: BanditInstance, rng: np.random.Generator):
        self.instance = instance
        self.family = instance.family
        self.num_arms = instance.num_arms
        self.rng = rng

    @abstractmethod
    def select(self, t: int) -> Tuple[int, ...]:
        """
        Choose the super arm to play at round t (1-based).

        Returns:
            A sorted tuple of base-arm indices belonging to the feasible family.
        """
        pass

    @abstractmethod
    def update(self, record: FeedbackRecord) -> None:
        """
        Absorb the feedback of the round just played.
        """
        pass
