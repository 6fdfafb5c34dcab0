import json
import logging
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

from .rising_functions import RisingFunction

logger = logging.getLogger(__name__)

# Tolerance used when checking the rising/concave shape and the [0, 1] range.
SHAPE_TOLERANCE = 1e-12


class InstanceError(ValueError):
    """Raised when an instance cannot be loaded or fails validation."""
    pass


class DagShortestPath(BaseModel):
    """Source-to-sink paths of a DAG. Edge i is base arm i."""
    model_config = ConfigDict(extra="forbid")

    task: Literal["shortest_path"] = "shortest_path"
    nodes: int = Field(..., ge=2)
    edges: List[Tuple[int, int]] = Field(..., min_length=1)
    source: int = 0
    sink: int


class SpanningTreeTask(BaseModel):
    """Spanning trees of an undirected graph. Edge i is base arm i."""
    model_config = ConfigDict(extra="forbid")

    task: Literal["spanning_tree"] = "spanning_tree"
    nodes: int = Field(..., ge=2)
    edges: List[Tuple[int, int]] = Field(..., min_length=1)


class BipartiteMatchingTask(BaseModel):
    """Maximal matchings of a bipartite graph. Edge i = (left, right) is base arm i."""
    model_config = ConfigDict(extra="forbid")

    task: Literal["matching"] = "matching"
    left: int = Field(..., ge=1)
    right: int = Field(..., ge=1)
    edges: List[Tuple[int, int]] = Field(..., min_length=1)


GraphTask = Annotated[
    Union[DagShortestPath, SpanningTreeTask, BipartiteMatchingTask],
    Field(discriminator="task"),
]


class SuperArmFamily(BaseModel):
    """
    The feasible super arms, either listed explicitly or implied by a graph task.

    Super arms are sorted tuples of 0-based base-arm indices. `reward` selects how
    the environment aggregates outcomes: the sum (additive) or the maximum (kmax).
    """
    model_config = ConfigDict(extra="forbid")

    sense: Literal["maximize", "minimize"] = "maximize"
    reward: Literal["additive", "kmax"] = "additive"
    subsets: Optional[List[Tuple[int, ...]]] = None
    graph: Optional[GraphTask] = None

    _membership: Dict[Tuple[int, ...], bool] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def _exactly_one_source(self) -> "SuperArmFamily":
        if (self.subsets is None) == (self.graph is None):
            raise ValueError("A super-arm family needs exactly one of 'subsets' or 'graph'.")
        return self

    @property
    def is_explicit(self) -> bool:
        return self.subsets is not None

    @property
    def max_size(self) -> int:
        """L: the largest super-arm size the family admits."""
        if self.subsets is not None:
            return max((len(s) for s in self.subsets), default=0)
        if isinstance(self.graph, BipartiteMatchingTask):
            return min(self.graph.left, self.graph.right, len(self.graph.edges))
        return min(self.graph.nodes - 1, len(self.graph.edges))

    @property
    def num_graph_arms(self) -> Optional[int]:
        return None if self.graph is None else len(self.graph.edges)

    def cached_membership(self, super_arm: Tuple[int, ...]) -> Optional[bool]:
        return self._membership.get(super_arm)

    def remember_membership(self, super_arm: Tuple[int, ...], feasible: bool) -> None:
        self._membership[super_arm] = feasible


class BanditInstance(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "instance"
    arms: List[RisingFunction] = Field(..., min_length=1)
    sigma: float = Field(default=0.0, ge=0)
    horizon: int = Field(..., ge=1)
    family: SuperArmFamily
    concave_certified: bool = False
    metadata: Dict[str, Any] = Field(default_factory=dict)

    @property
    def num_arms(self) -> int:
        return len(self.arms)

    @property
    def max_size(self) -> int:
        return self.family.max_size


class Violation(BaseModel):
    kind: str
    detail: str
    arm: Optional[int] = None
    pull: Optional[int] = None


class ValidationReport(BaseModel):
    valid: bool
    concave: bool
    violations: List[Violation] = Field(default_factory=list)

    def summary(self) -> str:
        if self.valid:
            return "valid"
        return "; ".join(v.detail for v in self.violations)


def _check_arms(instance: BanditInstance, violations: List[Violation]) -> bool:
    all_concave = True
    for idx, arm in enumerate(instance.arms):
        if arm.horizon < instance.horizon:
            violations.append(Violation(
                kind="horizon", arm=idx,
                detail=f"arm {idx} is defined up to {arm.horizon} pulls, instance horizon is {instance.horizon}",
            ))
            continue

        values = arm.values[: instance.horizon]
        out_of_range = np.flatnonzero((values < -SHAPE_TOLERANCE) | (values > 1 + SHAPE_TOLERANCE))
        if out_of_range.size:
            n = int(out_of_range[0]) + 1
            violations.append(Violation(
                kind="range", arm=idx, pull=n,
                detail=f"arm {idx} has mu({n})={values[n - 1]:.6g} outside [0, 1]",
            ))

        increments = arm.increments[: instance.horizon - 1]
        falling = np.flatnonzero(increments < -SHAPE_TOLERANCE)
        if falling.size:
            n = int(falling[0]) + 1
            violations.append(Violation(
                kind="rising", arm=idx, pull=n,
                detail=f"arm {idx} is not rising: mu({n + 1})={values[n]:.6g} < mu({n})={values[n - 1]:.6g}",
            ))

        convex_steps = np.flatnonzero(np.diff(increments) > SHAPE_TOLERANCE)
        if convex_steps.size:
            all_concave = False
            if instance.concave_certified:
                n = int(convex_steps[0]) + 1
                violations.append(Violation(
                    kind="concave", arm=idx, pull=n,
                    detail=f"arm {idx} is certified concave but gamma({n + 1}) > gamma({n})",
                ))
    return all_concave


def _check_explicit_family(instance: BanditInstance, violations: List[Violation]) -> None:
    seen = set()
    for pos, subset in enumerate(instance.family.subsets):
        label = f"super arm #{pos} {list(subset)}"
        if len(subset) == 0:
            violations.append(Violation(kind="family", detail=f"{label} is empty"))
            continue
        if list(subset) != sorted(set(subset)):
            violations.append(Violation(kind="family", detail=f"{label} is not sorted and deduplicated"))
        if any(i < 0 or i >= instance.num_arms for i in subset):
            violations.append(Violation(kind="family", detail=f"{label} references an arm outside [0, {instance.num_arms - 1}]"))
        key = tuple(sorted(set(subset)))
        if key in seen:
            violations.append(Violation(kind="family", detail=f"{label} is listed twice"))
        seen.add(key)
    if not instance.family.subsets:
        violations.append(Violation(kind="family", detail="explicit family has no super arms"))


def _check_graph_family(instance: BanditInstance, violations: List[Violation]) -> None:
    from solvers.graph_solvers import topological_order

    graph = instance.family.graph
    if len(graph.edges) != instance.num_arms:
        violations.append(Violation(
            kind="family",
            detail=f"graph has {len(graph.edges)} edges but the instance has {instance.num_arms} arms",
        ))

    if isinstance(graph, BipartiteMatchingTask):
        bad = [e for e in graph.edges if not (0 <= e[0] < graph.left and 0 <= e[1] < graph.right)]
        if bad:
            violations.append(Violation(kind="family", detail=f"matching edge {list(bad[0])} is outside the bipartition"))
        if instance.family.sense == "minimize":
            violations.append(Violation(kind="family", detail="matching families must use the maximize sense"))
        return

    bad = [e for e in graph.edges if not (0 <= e[0] < graph.nodes and 0 <= e[1] < graph.nodes) or e[0] == e[1]]
    if bad:
        violations.append(Violation(kind="family", detail=f"edge {list(bad[0])} is a self loop or references an unknown node"))
        return

    if isinstance(graph, DagShortestPath):
        if not (0 <= graph.source < graph.nodes and 0 <= graph.sink < graph.nodes) or graph.source == graph.sink:
            violations.append(Violation(kind="family", detail="source and sink must be distinct existing nodes"))
            return
        try:
            topological_order(graph.nodes, graph.edges)
        except ValueError as e:
            violations.append(Violation(kind="family", detail=str(e)))


def validate_instance(instance: BanditInstance) -> ValidationReport:
    """Check the rising property, the [0, 1] range, certified concavity and the family invariants."""
    violations: List[Violation] = []
    concave = _check_arms(instance, violations)

    if instance.family.reward == "kmax" and instance.family.sense == "minimize":
        violations.append(Violation(kind="family", detail="kmax reward is only defined for the maximize sense"))

    if instance.family.is_explicit:
        _check_explicit_family(instance, violations)
    else:
        _check_graph_family(instance, violations)

    report = ValidationReport(valid=not violations, concave=concave, violations=violations)
    if report.valid:
        logger.debug(f"Instance '{instance.name}' is valid (concave={concave}).")
    else:
        logger.info(f"Instance '{instance.name}' has {len(violations)} violation(s): {report.summary()}")
    return report


def save_instance(instance: BanditInstance, path: Union[str, Path]) -> None:
    Path(path).write_text(instance.model_dump_json(indent=2), encoding="utf-8")
    logger.info(f"Saved instance '{instance.name}' to {path}")


def load_instance(path: Union[str, Path]) -> BanditInstance:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise InstanceError(f"Instance file not found: {path}")
    except json.JSONDecodeError as e:
        raise InstanceError(f"Instance file {path} is not valid JSON: {e}")
    return instance_from_dict(data)


def instance_from_dict(data: Dict[str, Any]) -> BanditInstance:
    from pydantic import ValidationError

    try:
        return BanditInstance.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise InstanceError(f"Invalid instance at '{location}': {first['msg']}")
