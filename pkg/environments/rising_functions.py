import logging
from abc import abstractmethod
from typing import Annotated, Any, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

logger = logging.getLogger(__name__)


class RisingFunctionError(ValueError):
    """Raised when a rising function is evaluated outside its pull range."""
    pass


class BaseRisingFunction(BaseModel):
    """
    Mean outcome of a base arm as a function of its own pull count n in [1, horizon].

    Values are materialised once per instance so that evaluation inside the
    simulation loop is an array lookup. Instances are treated as immutable after
    construction.
    """
    model_config = ConfigDict(extra="forbid")

    horizon: int = Field(..., ge=1)

    _values: Optional[np.ndarray] = PrivateAttr(default=None)
    _prefix: Optional[np.ndarray] = PrivateAttr(default=None)
    _increments: Optional[np.ndarray] = PrivateAttr(default=None)

    def model_post_init(self, __context) -> None:
        pulls = np.arange(1, self.horizon + 1, dtype=float)
        self._values = np.asarray(self._evaluate(pulls), dtype=float)
        self._prefix = np.concatenate(([0.0], np.cumsum(self._values)))
        self._increments = np.asarray(self._evaluate_increments(), dtype=float)

    @abstractmethod
    def _evaluate(self, pulls: np.ndarray) -> np.ndarray:
        """Vectorised mu(n) for n = 1..horizon."""
        pass

    def _evaluate_increments(self) -> np.ndarray:
        return np.diff(self._values)

    @property
    def values(self) -> np.ndarray:
        """mu(1..T) as a read-only view; index 0 holds mu(1)."""
        view = self._values.view()
        view.flags.writeable = False
        return view

    @property
    def increments(self) -> np.ndarray:
        """gamma(n) = mu(n+1) - mu(n) for n = 1..T-1; index 0 holds gamma(1)."""
        view = self._increments.view()
        view.flags.writeable = False
        return view

    @property
    def prefix_sums(self) -> np.ndarray:
        """F(0..T) with F(0) = 0."""
        view = self._prefix.view()
        view.flags.writeable = False
        return view

    def mu(self, n: int) -> float:
        if n < 1 or n > self.horizon:
            raise RisingFunctionError(f"Pull count {n} is outside [1, {self.horizon}].")
        return float(self._values[n - 1])

    def cumulative(self, n: int) -> float:
        if n < 0 or n > self.horizon:
            raise RisingFunctionError(f"Pull count {n} is outside [0, {self.horizon}].")
        return float(self._prefix[n])

    def is_rising(self, tol: float = 1e-12) -> bool:
        return bool(np.all(self._increments >= -tol))

    def is_concave(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.diff(self._increments) <= tol))


class Constant(BaseRisingFunction):
    kind: Literal["constant"] = "constant"
    value: float

    def _evaluate(self, pulls: np.ndarray) -> np.ndarray:
        return np.full(pulls.shape, self.value)


class PiecewiseLinearSaturating(BaseRisingFunction):
    """intercept + slope*n up to the kink, plateau afterwards. Without a kink the line is capped at the plateau."""
    kind: Literal["piecewise_linear"] = "piecewise_linear"
    slope: float = Field(..., ge=0)
    plateau: float
    kink: Optional[int] = Field(default=None, ge=0)
    intercept: float = 0.0

    def _evaluate(self, pulls: np.ndarray) -> np.ndarray:
        line = self.intercept + self.slope * pulls
        if self.kink is None:
            return np.minimum(line, self.plateau)
        return np.where(pulls <= self.kink, line, self.plateau)


class PowerLawSaturating(BaseRisingFunction):
    """
    base + amplitude * sum_{m=1..n} (m + offset)^(-exponent), capped at plateau.

    offset=0 gives the late-bloomer shape of the synthetic environments,
    offset=1 gives the (n+1)^(-c) constrained family.
    """
    kind: Literal["power_law"] = "power_law"
    base: float = 0.0
    amplitude: float = Field(..., ge=0)
    exponent: float = Field(..., gt=0)
    offset: int = Field(default=0, ge=0)
    plateau: float = 1.0

    def _terms(self, pulls: np.ndarray) -> np.ndarray:
        return self.amplitude * np.power(pulls + self.offset, -self.exponent)

    def _evaluate(self, pulls: np.ndarray) -> np.ndarray:
        return np.minimum(self.base + np.cumsum(self._terms(pulls)), self.plateau)

    def _evaluate_increments(self) -> np.ndarray:
        # Exact per-term increments while below the plateau; differences once capped.
        if self.horizon < 2:
            return np.zeros(0)
        raw = self._terms(np.arange(2, self.horizon + 1, dtype=float))
        below_cap = self._values[1:] < self.plateau
        return np.where(below_cap, raw, np.diff(self._values))


class Tabulated(BaseRisingFunction):
    """Explicit mu(1..T) table; the horizon defaults to the table length."""
    kind: Literal["tabulated"] = "tabulated"
    table: List[float] = Field(..., min_length=1)

    @model_validator(mode="before")
    @classmethod
    def _default_horizon(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("horizon") is None and data.get("table"):
            data = {**data, "horizon": len(data["table"])}
        return data

    @model_validator(mode="after")
    def _check_table_length(self) -> "Tabulated":
        if self.horizon != len(self.table):
            raise ValueError(
                f"Tabulated horizon {self.horizon} does not match table length {len(self.table)}."
            )
        return self

    def _evaluate(self, pulls: np.ndarray) -> np.ndarray:
        return np.asarray(self.table, dtype=float)


RisingFunction = Annotated[
    Union[Constant, PiecewiseLinearSaturating, PowerLawSaturating, Tabulated],
    Field(discriminator="kind"),
]


def mu_eval(f: BaseRisingFunction, n: int) -> float:
    """Mean outcome of the n-th pull."""
    return f.mu(n)


def cumulative_mean(f: BaseRisingFunction, n: int) -> float:
    """F(n) = sum of mu(1..n); F(0) = 0."""
    return f.cumulative(n)
