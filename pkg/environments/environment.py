import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from solvers.factory import is_feasible

from .instance import BanditInstance

logger = logging.getLogger(__name__)


class InvalidActionError(ValueError):
    """Raised when a super arm outside the feasible family is played."""
    pass


@dataclass(frozen=True)
class FeedbackRecord:
    """Semi-bandit feedback for one round: (arm, outcome, pull count) per arm played."""
    t: int
    super_arm: Tuple[int, ...]
    outcomes: Tuple[Tuple[int, float, int], ...]

    @property
    def values(self) -> List[float]:
        return [x for _, x, _ in self.outcomes]


def kmax_reward(outcomes: Sequence[float]) -> float:
    """Reward of a K-max super arm: the largest base-arm outcome."""
    if len(outcomes) == 0:
        raise ValueError("K-max reward of an empty super arm is undefined.")
    return float(max(outcomes))


def super_arm_reward(instance: BanditInstance, outcomes: Sequence[float]) -> float:
    """Aggregate base-arm outcomes into the super-arm reward the family defines."""
    if instance.family.reward == "kmax":
        return kmax_reward(outcomes)
    if instance.family.sense == "minimize":
        return float(sum(x - 1.0 for x in outcomes))
    return float(sum(outcomes))


def expected_reward(instance: BanditInstance, super_arm: Sequence[int], pulls: np.ndarray) -> float:
    """Reward of playing super_arm next with noise removed, given pull counts before the play."""
    means = [instance.arms[i].mu(int(pulls[i]) + 1) for i in super_arm]
    return super_arm_reward(instance, means)


def env_step(
    instance: BanditInstance,
    pulls: np.ndarray,
    super_arm: Sequence[int],
    t: int,
    rng: np.random.Generator,
) -> FeedbackRecord:
    """
    Play super_arm at round t and return the feedback of every arm in it.

    pulls is updated in place: each arm in the super arm gains exactly one pull.
    Outcomes are mu(N+1) plus Gaussian noise with std sigma, clipped to [0, 1].
    """
    key = tuple(super_arm)
    if not is_feasible(instance.family, key):
        raise InvalidActionError(f"Super arm {list(key)} is not in the feasible family (t={t}).")

    counts = np.array([pulls[i] + 1 for i in key], dtype=int)
    if np.any(counts > instance.horizon):
        raise InvalidActionError(f"Super arm {list(key)} exceeds the pull horizon {instance.horizon}.")

    means = np.array([instance.arms[i].mu(int(n)) for i, n in zip(key, counts)])
    if instance.sigma > 0:
        observed = np.clip(means + instance.sigma * rng.standard_normal(len(key)), 0.0, 1.0)
    else:
        observed = means

    for i in key:
        pulls[i] += 1
    return FeedbackRecord(
        t=t,
        super_arm=key,
        outcomes=tuple((i, float(x), int(n)) for i, x, n in zip(key, observed, counts)),
    )


@dataclass
class RunTrace:
    """Everything recorded while running one policy on one instance with one seed."""
    instance_name: str
    policy: str
    seed: int
    actions: List[Tuple[int, ...]] = field(default_factory=list)
    expected_rewards: List[float] = field(default_factory=list)
    sampled_rewards: List[float] = field(default_factory=list)
    final_pulls: List[int] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return len(self.actions)
