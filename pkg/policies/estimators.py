import logging
import math
from typing import List, NamedTuple, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field

from .base_policy import PolicyError

logger = logging.getLogger(__name__)


class InsufficientHistoryError(PolicyError):
    """Raised when an estimate needs more observations than an arm has."""
    pass


class CrucbConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epsilon: float = Field(default=0.25, gt=0, lt=0.5)
    sigma: float = Field(default=0.0, ge=0)


class FuturePotential(NamedTuple):
    mu_hat: float
    beta: float
    mu_acute: float


class ArmHistory:
    """
    Outcome sequence X(1..N) of one arm (or super arm) with running prefix sums.

    Keeps sum X(l) and sum l*X(l) so window sums, sliding means and the
    future-potential estimate are O(1) per query.
    """

    __slots__ = ("_prefix", "_weighted")

    def __init__(self, outcomes: Optional[Sequence[float]] = None):
        self._prefix: List[float] = [0.0]
        self._weighted: List[float] = [0.0]
        for x in outcomes or ():
            self.append(x)

    def append(self, x: float) -> None:
        pull = len(self._prefix)
        self._prefix.append(self._prefix[-1] + x)
        self._weighted.append(self._weighted[-1] + pull * x)

    @property
    def count(self) -> int:
        return len(self._prefix) - 1

    def total(self, start: int, end: int) -> float:
        """sum of X(l) for start <= l <= end (1-based, inclusive)."""
        return self._prefix[end] - self._prefix[start - 1]

    def weighted_total(self, start: int, end: int) -> float:
        """sum of l * X(l) for start <= l <= end."""
        return self._weighted[end] - self._weighted[start - 1]

    def recent(self, window: int) -> Tuple[float, int]:
        """Sum and size of the last min(window, N) observations."""
        size = min(window, self.count)
        return self.total(self.count - size + 1, self.count), size

    def recent_mean(self, window: int) -> float:
        total, size = self.recent(window)
        if size == 0:
            raise InsufficientHistoryError("Sliding mean of an empty history.")
        return total / size


def estimation_window(pulls: int, epsilon: float) -> int:
    """h = max(1, floor(epsilon * N))."""
    return max(1, math.floor(epsilon * pulls))


def crucb_future_potential(
    history: ArmHistory,
    t: int,
    config: CrucbConfig,
    window: Optional[int] = None,
) -> FuturePotential:
    """
    Optimistic estimate of an arm's mean at global round t.

    mu_hat averages, over the last h observations, each observation projected
    forward to round t along the slope measured against the observation h pulls
    earlier. beta widens it by the noise-driven uncertainty of that projection.
    """
    N = history.count
    if N < 2:
        raise InsufficientHistoryError(f"Need at least 2 observations, have {N}.")
    h = estimation_window(N, config.epsilon) if window is None else window
    if h < 1 or 2 * h > N:
        raise InsufficientHistoryError(f"Window h={h} needs 2h <= N={N}.")

    recent = history.total(N - h + 1, N)
    earlier = history.total(N - 2 * h + 1, N - h)
    # sum (t - l) X(l) over the recent window, and sum (t - l) X(l - h) with m = l - h.
    projected_recent = t * recent - history.weighted_total(N - h + 1, N)
    projected_earlier = (t - h) * earlier - history.weighted_total(N - 2 * h + 1, N - h)

    mu_hat = recent / h + (projected_recent - projected_earlier) / (h * h)
    lead = max(0, t - N + h - 1)
    beta = config.sigma * lead * math.sqrt(10.0 * math.log(max(t, 2) ** 3) / h ** 3)
    return FuturePotential(mu_hat=mu_hat, beta=beta, mu_acute=mu_hat + beta)


def sliding_ucb_index(history: ArmHistory, t: int, window: int) -> float:
    """Sliding-window mean plus sqrt(3 ln t / (2 N)), N being the total pull count."""
    mean = history.recent_mean(window)
    return mean + math.sqrt(3.0 * math.log(max(t, 1)) / (2.0 * history.count))


def beta_posterior(window_outcomes: Sequence[float]) -> Tuple[float, float]:
    """Beta(1 + sum x, 1 + sum (1 - x)) for outcomes in [0, 1]."""
    successes = float(sum(window_outcomes))
    return 1.0 + successes, 1.0 + len(window_outcomes) - successes


def window_posterior(history: ArmHistory, window: int) -> Tuple[float, float]:
    total, size = history.recent(window)
    return 1.0 + total, 1.0 + size - total
