import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, List, Literal, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel

from environments.environment import RunTrace, super_arm_reward
from environments.instance import BanditInstance
from solvers.enumeration import DEFAULT_ENUMERATION_CAP, EnumerationOverflowError, enumerate_super_arms
from solvers.factory import is_feasible, solve

logger = logging.getLogger(__name__)

# Upper bound on the number of floats materialised per chunk of super-arm curves.
CHUNK_ELEMENTS = 4_000_000
TRACE_TOLERANCE = 1e-9
BRUTE_FORCE_MAX_HORIZON = 10
BRUTE_FORCE_MAX_SUPER_ARMS = 6


class OracleError(ValueError):
    """Raised when the oracle cannot be computed for the requested horizon."""
    pass


class TraceMismatchError(ValueError):
    """Raised when a run trace is inconsistent with the instance it claims to come from."""
    pass


class OracleResult(BaseModel):
    t: int
    super_arm: Tuple[int, ...]
    value: float
    method: Literal["enumeration", "solver"]


class BruteForceResult(BaseModel):
    horizon: int
    best_value: float
    best_sequence: List[Tuple[int, ...]]
    best_constant: Tuple[int, ...]
    best_constant_value: float
    constant_is_optimal: bool


@dataclass
class RegretCurve:
    t: np.ndarray
    expected_reward: np.ndarray
    policy_cum: np.ndarray
    oracle_cum: np.ndarray
    regret: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "t": self.t,
            "expected_reward": self.expected_reward,
            "cum_reward": self.policy_cum,
            "oracle_cum": self.oracle_cum,
            "regret": self.regret,
        })


def _constant_play_curves(instance: BanditInstance, super_arms: List[Tuple[int, ...]], horizon: int) -> np.ndarray:
    """Cumulative expected reward of playing each super arm for t = 0..horizon rounds."""
    if instance.family.reward == "kmax":
        curves = np.empty((len(super_arms), horizon + 1))
        for k, arm in enumerate(super_arms):
            best = np.max(np.vstack([instance.arms[i].values[:horizon] for i in arm]), axis=0)
            curves[k] = np.concatenate(([0.0], np.cumsum(best)))
        return curves

    prefix = np.vstack([arm.prefix_sums[: horizon + 1] for arm in instance.arms])
    indicator = np.zeros((len(super_arms), instance.num_arms))
    for k, arm in enumerate(super_arms):
        indicator[k, list(arm)] = 1.0
    curves = indicator @ prefix
    if instance.family.sense == "minimize":
        sizes = indicator.sum(axis=1)
        curves -= np.outer(sizes, np.arange(horizon + 1, dtype=float))
    return curves


def _chunks(super_arms: List[Tuple[int, ...]], horizon: int) -> Iterator[Tuple[int, List[Tuple[int, ...]]]]:
    size = max(1, CHUNK_ELEMENTS // (horizon + 1))
    for start in range(0, len(super_arms), size):
        yield start, super_arms[start:start + size]


def _check_horizon(instance: BanditInstance, t: int) -> None:
    if t < 1 or t > instance.horizon:
        raise OracleError(f"Horizon {t} is outside [1, {instance.horizon}].")


def _try_enumerate(instance: BanditInstance, enumeration_cap: int) -> Optional[List[Tuple[int, ...]]]:
    try:
        return enumerate_super_arms(instance.family, enumeration_cap)
    except EnumerationOverflowError as e:
        if instance.family.reward == "kmax":
            raise OracleError(f"K-max oracle needs an enumerable family: {e}")
        logger.info(f"Falling back to the per-horizon solver: {e}")
        return None


def _solver_oracle(instance: BanditInstance, t: int) -> OracleResult:
    weights = np.array([arm.cumulative(t) / t for arm in instance.arms])
    best = solve(instance.family, weights)
    value = float(_constant_play_curves(instance, [best], t)[0, t])
    return OracleResult(t=t, super_arm=best, value=value, method="solver")


def oracle_super_arm(instance: BanditInstance, t: int, enumeration_cap: int = DEFAULT_ENUMERATION_CAP) -> OracleResult:
    """
    Best constant super arm over t rounds, argmax_S sum_{i in S} F_i(t).

    Enumerates the family when it fits under the cap; otherwise solves the
    combinatorial problem with weights F_i(t) / t. Ties go to the
    lexicographically smallest super arm.
    """
    _check_horizon(instance, t)
    super_arms = _try_enumerate(instance, enumeration_cap)

    if super_arms is None:
        return _solver_oracle(instance, t)

    best_value, best_arm = -np.inf, None
    for _, chunk in _chunks(super_arms, t):
        values = _constant_play_curves(instance, chunk, t)[:, t]
        k = int(np.argmax(values))
        if values[k] > best_value:
            best_value, best_arm = float(values[k]), chunk[k]
    return OracleResult(t=t, super_arm=best_arm, value=best_value, method="enumeration")


def oracle_curve(instance: BanditInstance, horizon: int, enumeration_cap: int = DEFAULT_ENUMERATION_CAP) -> np.ndarray:
    """Oracle cumulative reward for every t = 1..horizon, each t with its own best constant super arm."""
    _check_horizon(instance, horizon)
    super_arms = _try_enumerate(instance, enumeration_cap)

    if super_arms is None:
        return np.array([_solver_oracle(instance, t).value for t in range(1, horizon + 1)])

    best = np.full(horizon, -np.inf)
    for _, chunk in _chunks(super_arms, horizon):
        best = np.maximum(best, _constant_play_curves(instance, chunk, horizon)[:, 1:].max(axis=0))
    return best


def oracle_schedule(instance: BanditInstance, horizon: int, enumeration_cap: int = DEFAULT_ENUMERATION_CAP) -> List[Tuple[int, Tuple[int, ...]]]:
    """(first t, super arm) for each stretch of horizons sharing the same oracle super arm."""
    _check_horizon(instance, horizon)
    super_arms = enumerate_super_arms(instance.family, enumeration_cap)
    curves = _constant_play_curves(instance, super_arms, horizon)[:, 1:]
    winners = np.argmax(curves, axis=0)
    schedule = []
    for t, k in enumerate(winners, start=1):
        if not schedule or schedule[-1][1] != super_arms[k]:
            schedule.append((t, super_arms[k]))
    return schedule


def replay_expected_rewards(trace: RunTrace, instance: BanditInstance) -> Tuple[np.ndarray, np.ndarray]:
    """Noise-free reward of every round of the trace and the implied final pull counts."""
    if trace.horizon > instance.horizon:
        raise TraceMismatchError(f"Trace has {trace.horizon} rounds, instance horizon is {instance.horizon}.")

    pulls = np.zeros(instance.num_arms, dtype=int)
    rewards = np.empty(trace.horizon)
    for step, action in enumerate(trace.actions):
        if not is_feasible(instance.family, action):
            raise TraceMismatchError(f"Round {step + 1} plays {list(action)}, which is not a feasible super arm.")
        means = [instance.arms[i].mu(int(pulls[i]) + 1) for i in action]
        rewards[step] = super_arm_reward(instance, means)
        pulls[list(action)] += 1
    return rewards, pulls


def regret_curve(
    trace: RunTrace,
    instance: BanditInstance,
    enumeration_cap: int = DEFAULT_ENUMERATION_CAP,
    sampled: bool = False,
    oracle_cum: Optional[np.ndarray] = None,
) -> RegretCurve:
    """
    Pseudo-regret of a run: oracle cumulative reward minus the policy's cumulative
    expected reward, the oracle re-optimised for every prefix length t. With
    sampled=True the policy side uses the realised rewards instead. A precomputed
    oracle curve of at least the trace length can be passed in.
    """
    rewards, pulls = replay_expected_rewards(trace, instance)

    if trace.expected_rewards and len(trace.expected_rewards) == trace.horizon:
        drift = np.max(np.abs(rewards - np.asarray(trace.expected_rewards)), initial=0.0)
        if drift > TRACE_TOLERANCE:
            raise TraceMismatchError(f"Recorded expected rewards differ from the instance by {drift:.3g}.")
    if trace.final_pulls and list(pulls) != list(trace.final_pulls):
        raise TraceMismatchError(f"Final pull counts {trace.final_pulls} do not match the actions ({pulls.tolist()}).")

    if sampled:
        if len(trace.sampled_rewards) != trace.horizon:
            raise TraceMismatchError("Trace carries no sampled rewards for every round.")
        per_round = np.asarray(trace.sampled_rewards, dtype=float)
    else:
        per_round = rewards

    policy_cum = np.cumsum(per_round)
    if oracle_cum is None:
        oracle_cum = oracle_curve(instance, trace.horizon, enumeration_cap)
    oracle_cum = np.asarray(oracle_cum)[: trace.horizon]
    return RegretCurve(
        t=np.arange(1, trace.horizon + 1),
        expected_reward=per_round,
        policy_cum=policy_cum,
        oracle_cum=oracle_cum,
        regret=oracle_cum - policy_cum,
    )


def brute_force_optimal(instance: BanditInstance, horizon: int) -> BruteForceResult:
    """
    Exhaustive best policy over `horizon` rounds by dynamic programming over pull counts.

    Small cases only. Also reports the best constant super arm so callers can
    check whether switching ever pays off.
    """
    if horizon < 1 or horizon > min(BRUTE_FORCE_MAX_HORIZON, instance.horizon):
        raise OracleError(f"Brute force supports 1 <= T <= {min(BRUTE_FORCE_MAX_HORIZON, instance.horizon)}, got {horizon}.")
    super_arms = enumerate_super_arms(instance.family)
    if len(super_arms) > BRUTE_FORCE_MAX_SUPER_ARMS:
        raise OracleError(f"Brute force supports at most {BRUTE_FORCE_MAX_SUPER_ARMS} super arms, got {len(super_arms)}.")

    def step_reward(pulls: Tuple[int, ...], arm: Tuple[int, ...]) -> float:
        return super_arm_reward(instance, [instance.arms[i].mu(pulls[i] + 1) for i in arm])

    def advance(pulls: Tuple[int, ...], arm: Tuple[int, ...]) -> Tuple[int, ...]:
        return tuple(n + 1 if i in arm else n for i, n in enumerate(pulls))

    @lru_cache(maxsize=None)
    def best_from(pulls: Tuple[int, ...], rounds_left: int) -> Tuple[float, int]:
        if rounds_left == 0:
            return 0.0, -1
        best_value, best_k = -np.inf, -1
        for k, arm in enumerate(super_arms):
            value = step_reward(pulls, arm) + best_from(advance(pulls, arm), rounds_left - 1)[0]
            if value > best_value + 1e-12:
                best_value, best_k = value, k
        return best_value, best_k

    start = tuple([0] * instance.num_arms)
    best_value = best_from(start, horizon)[0]
    sequence, pulls = [], start
    for rounds_left in range(horizon, 0, -1):
        k = best_from(pulls, rounds_left)[1]
        sequence.append(super_arms[k])
        pulls = advance(pulls, super_arms[k])

    constant_values = _constant_play_curves(instance, super_arms, horizon)[:, horizon]
    k_const = int(np.argmax(constant_values))
    result = BruteForceResult(
        horizon=horizon,
        best_value=float(best_value),
        best_sequence=sequence,
        best_constant=super_arms[k_const],
        best_constant_value=float(constant_values[k_const]),
        constant_is_optimal=bool(constant_values[k_const] >= best_value - 1e-9),
    )
    if instance.family.reward == "additive" and not result.constant_is_optimal:
        logger.warning(f"No constant super arm attains the optimum on additive instance '{instance.name}'.")
    return result
