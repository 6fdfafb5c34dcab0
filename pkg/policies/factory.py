from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from environments.instance import BanditInstance
from solvers.enumeration import DEFAULT_ENUMERATION_CAP

from .base_arm_policies import SWCTS, SWCUCB
from .base_policy import Policy, PolicyError
from .constant_policy import ConstantPolicy
from .crucb import CRUCB
from .estimators import CrucbConfig
from .super_arm_policies import SWTS, SWUCB, RedUCB, SlidingWindowConfig

POLICY_NAMES: List[str] = ["crucb", "red-ucb", "sw-ucb", "sw-ts", "sw-cucb", "sw-cts", "constant", "oracle-constant"]


def _crucb_config(instance: BanditInstance, params: Dict[str, Any]) -> CrucbConfig:
    return CrucbConfig(**{"sigma": instance.sigma, **params})


def get_policy(
    name: str,
    instance: BanditInstance,
    rng: np.random.Generator,
    params: Optional[Dict[str, Any]] = None,
    horizon: Optional[int] = None,
    enumeration_cap: int = DEFAULT_ENUMERATION_CAP,
) -> Policy:
    """
    Factory function to build a fresh policy instance for one run.
    """
    params = dict(params or {})
    horizon = horizon or instance.horizon
    try:
        if name == "crucb":
            return CRUCB(instance, rng, _crucb_config(instance, params))
        elif name == "red-ucb":
            return RedUCB(instance, rng, _crucb_config(instance, params), enumeration_cap=enumeration_cap)
        elif name == "sw-ucb":
            return SWUCB(instance, rng, SlidingWindowConfig(**params), enumeration_cap=enumeration_cap, horizon=horizon)
        elif name == "sw-ts":
            return SWTS(instance, rng, SlidingWindowConfig(**params), enumeration_cap=enumeration_cap, horizon=horizon)
        elif name == "sw-cucb":
            return SWCUCB(instance, rng, SlidingWindowConfig(**params), horizon=horizon)
        elif name == "sw-cts":
            return SWCTS(instance, rng, SlidingWindowConfig(**params), horizon=horizon)
        elif name == "constant":
            if "super_arm" not in params:
                raise PolicyError("The constant policy needs a 'super_arm' parameter.")
            return ConstantPolicy(instance, rng, params["super_arm"])
        elif name == "oracle-constant":
            from services.oracle_service import oracle_super_arm

            best = oracle_super_arm(instance, horizon, enumeration_cap=enumeration_cap)
            policy = ConstantPolicy(instance, rng, best.super_arm)
            policy.name = "oracle-constant"
            return policy
        else:
            raise PolicyError(f"Unknown policy: {name}. Available: {', '.join(POLICY_NAMES)}")
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise PolicyError(f"Invalid parameter '{location}' for policy '{name}': {first['msg']}")
