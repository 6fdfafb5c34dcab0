import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, computed_field
from scipy import integrate

from environments.instance import BanditInstance

logger = logging.getLogger(__name__)


class BoundsError(ValueError):
    """Raised for parameters outside the range where a bound is defined."""
    pass


class UpperBoundTerms(BaseModel):
    q: float
    constant: float
    rising: float
    noise: float

    @computed_field
    @property
    def total(self) -> float:
        return self.constant + self.rising + self.noise


class ExponentRow(BaseModel):
    c: float
    lower_exponent: float
    upper_exponent: float


class BoundReport(BaseModel):
    parameters: Dict[str, float]
    upper: UpperBoundTerms
    sweep: List[UpperBoundTerms] = Field(default_factory=list)
    lower_unconstrained: float
    lower_constrained: Optional[float] = None
    exponents: List[ExponentRow] = Field(default_factory=list)

    def to_json(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.model_dump_json(indent=2), encoding="utf-8")

    def to_frame(self) -> pd.DataFrame:
        rows = [(k, v) for k, v in self.parameters.items()]
        rows += [
            ("q", self.upper.q),
            ("term_constant", self.upper.constant),
            ("term_rising", self.upper.rising),
            ("term_noise", self.upper.noise),
            ("upper_total", self.upper.total),
            ("lower_unconstrained", self.lower_unconstrained),
        ]
        if self.lower_constrained is not None:
            rows.append(("lower_constrained", self.lower_constrained))
        return pd.DataFrame(rows, columns=["parameter", "value"])

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False)


def _check_q(q: float) -> None:
    if not 0.0 <= q <= 1.0:
        raise BoundsError(f"q must lie in [0, 1], got {q}")


def _powered(increments: np.ndarray, q: float) -> np.ndarray:
    # 0^q counts as 0 for every q, q = 0 included.
    positive = increments > 0
    out = np.zeros_like(increments, dtype=float)
    out[positive] = np.power(increments[positive], q)
    return out


def cumulative_increment(instance: BanditInstance, M: float, q: float) -> float:
    """
    sum_{l=1}^{M-1} max_i gamma_i(l)^q, the largest per-arm growth left after l pulls.

    M is floored to an integer; increments beyond the instance horizon count as zero.
    """
    _check_q(q)
    if M < 1:
        raise BoundsError(f"M must be at least 1, got {M}")
    last = min(int(math.floor(M)) - 1, instance.horizon - 1)
    if last <= 0:
        return 0.0
    increments = np.vstack([arm.increments[:last] for arm in instance.arms])
    return float(np.sum(_powered(np.max(increments, axis=0), q)))


def envelope_cumulative_increment(c: float, M: float, q: float) -> float:
    """Same sum for the envelope gamma(l) = (l + 1)^(-c)."""
    _check_q(q)
    if c <= 0:
        raise BoundsError(f"c must be positive, got {c}")
    last = int(math.floor(M)) - 1
    if last <= 0:
        return 0.0
    l = np.arange(1, last + 1, dtype=float)
    return float(np.sum(np.power(l + 1.0, -c * q)))


def _check_common(T: int, K: int, L: int, epsilon: float, sigma: float) -> None:
    if T < 1 or K < 1 or L < 1:
        raise BoundsError(f"T, K and L must be positive, got T={T}, K={K}, L={L}")
    if L > K:
        raise BoundsError(f"L={L} cannot exceed K={K}")
    if not 0 < epsilon < 0.5:
        raise BoundsError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    if sigma < 0:
        raise BoundsError(f"sigma must be non-negative, got {sigma}")


def noise_term(T: int, K: int, epsilon: float, sigma: float) -> float:
    """
    K * (n' + 2 sigma T sqrt(6 ln(4T) / eps^3) * 2 / sqrt(n')) with
    n' = (2 sigma T)^(2/3) (6 ln 4T)^(1/3) / eps. Zero for noiseless instances.
    """
    if sigma == 0:
        return 0.0
    log_term = 6.0 * math.log(4.0 * T)
    n_prime = (2.0 * sigma * T) ** (2.0 / 3.0) * log_term ** (1.0 / 3.0) / epsilon
    tail = 2.0 * sigma * T * math.sqrt(log_term / epsilon ** 3) * 2.0 / math.sqrt(n_prime)
    return K * (n_prime + tail)


def upper_bound_terms(
    T: int,
    K: int,
    L: int,
    q: float,
    epsilon: float,
    sigma: float,
    instance: Optional[BanditInstance] = None,
    c: Optional[float] = None,
) -> UpperBoundTerms:
    """
    The three regret upper-bound terms for one q.

    The rising term uses the instance's increments when one is given, otherwise
    the (l + 1)^(-c) envelope.
    """
    _check_common(T, K, L, epsilon, sigma)
    _check_q(q)
    if instance is None and c is None:
        raise BoundsError("Either an instance or an envelope exponent c is required.")

    M = (1.0 - 2.0 * epsilon) * L * T / K
    if instance is not None:
        upsilon = cumulative_increment(instance, max(M, 1.0), q)
    else:
        upsilon = envelope_cumulative_increment(c, max(M, 1.0), q)

    return UpperBoundTerms(
        q=q,
        constant=(2.0 + L * math.pi / 3.0) * K,
        rising=K * T ** q / (1.0 - 2.0 * epsilon) * upsilon,
        noise=noise_term(T, K, epsilon, sigma),
    )


def sweep_upper_bound(
    T: int,
    K: int,
    L: int,
    epsilon: float,
    sigma: float,
    q_grid: Optional[Sequence[float]] = None,
    instance: Optional[BanditInstance] = None,
    c: Optional[float] = None,
) -> List[UpperBoundTerms]:
    """Upper-bound terms over a grid of q (default 0, 0.05, ..., 1)."""
    grid = list(q_grid) if q_grid is not None else [round(q, 2) for q in np.linspace(0.0, 1.0, 21)]
    return [upper_bound_terms(T, K, L, q, epsilon, sigma, instance=instance, c=c) for q in grid]


def best_upper_bound(terms: Sequence[UpperBoundTerms]) -> UpperBoundTerms:
    if not terms:
        raise BoundsError("No upper-bound terms to choose from.")
    return min(terms, key=lambda term: (term.total, term.q))


def rising_term_integral(c: float, K: int, L: int, T: int, q: float, epsilon: float) -> float:
    """
    Rising term with the envelope sum replaced by its integral over [1, M],
    the continuous approximation behind the T^(1/c) rate.
    """
    _check_q(q)
    M = (1.0 - 2.0 * epsilon) * L * T / K
    if M <= 1:
        return 0.0
    area, _ = integrate.quad(lambda x: (x + 1.0) ** (-c * q), 1.0, M, limit=200)
    return K * T ** q / (1.0 - 2.0 * epsilon) * area


def lower_bound_curves(T: int, L: int, c: Optional[float] = None) -> Dict[str, Optional[float]]:
    """Minimax lower bounds: L*T/32 without constraints, max(L sqrt(T), L T^(2-c)) for c > 1."""
    if T < 1 or L < 1:
        raise BoundsError(f"T and L must be positive, got T={T}, L={L}")
    constrained = None
    if c is not None:
        if c <= 1:
            constrained = L * T / 32.0
        else:
            constrained = max(L * math.sqrt(T), L * T ** (2.0 - c))
    return {"unconstrained": L * T / 32.0, "constrained": constrained}


def exponent_table(c_values: Sequence[float]) -> List[ExponentRow]:
    """Growth exponents in T of the lower and upper regret bounds; both are linear for c <= 1."""
    rows = []
    for c in c_values:
        if c <= 0:
            raise BoundsError(f"c must be positive, got {c}")
        lower = min(1.0, max(0.5, 2.0 - c))
        upper = min(1.0, max(2.0 / 3.0, 1.0 / c))
        rows.append(ExponentRow(c=c, lower_exponent=lower, upper_exponent=upper))
    return rows


def build_bound_report(
    T: int,
    K: int,
    L: int,
    epsilon: float,
    sigma: float,
    c: Optional[float] = None,
    q: Optional[float] = None,
    instance: Optional[BanditInstance] = None,
) -> BoundReport:
    """Upper bound at q (or the best q of the default grid), lower bounds and the exponent table."""
    sweep = [] if q is not None else sweep_upper_bound(T, K, L, epsilon, sigma, instance=instance, c=c)
    upper = upper_bound_terms(T, K, L, q, epsilon, sigma, instance=instance, c=c) if q is not None else best_upper_bound(sweep)
    lower = lower_bound_curves(T, L, c)
    exponents = exponent_table([c]) if c is not None else []
    logger.info(f"Bound report T={T} K={K} L={L}: upper={upper.total:.6g} at q={upper.q}, lower={lower['unconstrained']:.6g}")
    return BoundReport(
        parameters={"T": T, "K": K, "L": L, "epsilon": epsilon, "sigma": sigma, **({"c": c} if c is not None else {})},
        upper=upper,
        sweep=sweep,
        lower_unconstrained=lower["unconstrained"],
        lower_constrained=lower["constrained"],
        exponents=exponents,
    )
