import itertools
import logging
from typing import Any, Callable, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel
from scipy.optimize import brentq

from .instance import (
    BanditInstance,
    BipartiteMatchingTask,
    DagShortestPath,
    SpanningTreeTask,
    SuperArmFamily,
)
from .rising_functions import Constant, PiecewiseLinearSaturating, PowerLawSaturating, Tabulated

logger = logging.getLogger(__name__)

# Relative tolerance on the balance equation of the constrained pair.
BALANCE_TOLERANCE = 1e-12


class ParameterError(ValueError):
    """Raised when generator parameters fall outside their documented ranges."""
    pass


class ConstructionError(ValueError):
    """Raised when a generator cannot satisfy its defining equations."""
    pass


class GeneratorInfo(BaseModel):
    name: str
    description: str
    parameters: Dict[str, str]


# Graph presets for the synthetic instance: each edge is (u, v, role).
GRAPH_PRESETS: Dict[str, Dict[str, Any]] = {
    "shortest_path": {
        "task": "shortest_path", "nodes": 4, "source": 0, "sink": 3, "sense": "minimize",
        "edges": [(0, 1, "late"), (1, 3, "early"), (0, 2, "early"), (2, 3, "early")],
    },
    "spanning_tree": {
        "task": "spanning_tree", "nodes": 3, "sense": "minimize",
        "edges": [(0, 1, "late"), (1, 2, "early"), (0, 2, "early")],
    },
    "matching": {
        "task": "matching", "left": 2, "right": 2, "sense": "maximize",
        "edges": [(0, 0, "late"), (0, 1, "early"), (1, 0, "early"), (1, 1, "early")],
    },
}


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ParameterError(message)


def _power_sum(horizon: int, exponent: float) -> float:
    n = np.arange(1, horizon + 1, dtype=float)
    return float(np.sum(np.power(n, -exponent)))


def _build_family(graph: Dict[str, Any]) -> Tuple[SuperArmFamily, List[str]]:
    edges = [(int(e[0]), int(e[1])) for e in graph["edges"]]
    roles = [str(e[2]) for e in graph["edges"]]
    task = graph.get("task", "shortest_path")
    if task == "shortest_path":
        spec = DagShortestPath(nodes=graph["nodes"], edges=edges, source=graph.get("source", 0), sink=graph["sink"])
    elif task == "spanning_tree":
        spec = SpanningTreeTask(nodes=graph["nodes"], edges=edges)
    elif task == "matching":
        spec = BipartiteMatchingTask(left=graph["left"], right=graph["right"], edges=edges)
    else:
        raise ParameterError(f"Unknown graph task: {task}")
    default_sense = "maximize" if task == "matching" else "minimize"
    return SuperArmFamily(sense=graph.get("sense", default_sense), graph=spec), roles


def make_synthetic_instance(
    c: float = 1.1,
    T: int = 200_000,
    lb_start: float = 0.0,
    lb_end: float = 0.92,
    ep_level: float = 0.8,
    sigma: float = 0.01,
    graph: Union[str, Dict[str, Any], None] = None,
    name: str = "synthetic",
) -> BanditInstance:
    """
    Graph instance mixing one late-bloomer arm type with constant early-peaker arms.

    The late bloomer is lb_start + A * sum_{m<=n} m^(-c) with A chosen so that it
    reaches lb_end exactly at n = T. `graph` is a preset name or an explicit graph
    whose edges are (u, v, "late" | "early").
    """
    _require(c > 0, f"c must be positive, got {c}")
    _require(T >= 1, f"T must be at least 1, got {T}")
    _require(0 <= lb_start < lb_end <= 1, f"Need 0 <= lb_start < lb_end <= 1, got {lb_start} and {lb_end}")
    _require(0 <= ep_level <= 1, f"ep_level must be in [0, 1], got {ep_level}")
    _require(sigma >= 0, f"sigma must be non-negative, got {sigma}")

    if graph is None:
        graph = "shortest_path"
    if isinstance(graph, str):
        if graph not in GRAPH_PRESETS:
            raise ParameterError(f"Unknown graph preset: {graph}. Available: {sorted(GRAPH_PRESETS)}")
        graph = GRAPH_PRESETS[graph]
    family, roles = _build_family(graph)
    if any(role not in ("late", "early") for role in roles):
        raise ParameterError(f"Edge roles must be 'late' or 'early', got {sorted(set(roles))}")

    amplitude = (lb_end - lb_start) / _power_sum(T, c)
    late = PowerLawSaturating(base=lb_start, amplitude=amplitude, exponent=c, plateau=1.0, horizon=T)
    early = Constant(value=ep_level, horizon=T)
    arms = [late if role == "late" else early for role in roles]

    logger.info(f"Built synthetic instance '{name}': {len(arms)} arms, T={T}, c={c}, graph={family.graph.task}")
    return BanditInstance(
        name=name,
        arms=arms,
        sigma=sigma,
        horizon=T,
        family=family,
        concave_certified=True,
        metadata={"generator": "synthetic", "c": c, "lb_start": lb_start, "lb_end": lb_end,
                  "ep_level": ep_level, "amplitude": amplitude, "roles": roles},
    )


def _replicated_family(L: int) -> SuperArmFamily:
    """Arms 0..L-1 are copies of the first arm, L..2L-1 of the second; pick one of (i, L+i) per slot."""
    subsets = [tuple(sorted(choice)) for choice in itertools.product(*[(i, L + i) for i in range(L)])]
    return SuperArmFamily(sense="maximize", subsets=sorted(subsets))


def make_lower_bound_pair(T: int, L: int = 1, variant: Optional[Literal["A", "B"]] = None) -> Union[Tuple[BanditInstance, BanditInstance], BanditInstance]:
    """
    Two instances that agree on the first T/3 pulls of the rising arm.

    A: constant 1/2 against 3n/(2T) rising to 1 at n = 2T/3.
    B: constant 1/2 against 3n/(2T) flattening at 1/2 after n = T/3.
    Both are written as min(3n/(2T), plateau) so non-integer breakpoints stay continuous.
    """
    _require(T >= 3, f"T must be at least 3, got {T}")
    _require(L >= 1, f"L must be at least 1, got {L}")

    slope = 3.0 / (2.0 * T)
    breakpoints = {"A": 2 * T / 3, "B": T / 3}
    plateaus = {"A": 1.0, "B": 0.5}

    def build(which: str) -> BanditInstance:
        steady = Constant(value=0.5, horizon=T)
        rising = PiecewiseLinearSaturating(slope=slope, plateau=plateaus[which], horizon=T)
        return BanditInstance(
            name=f"lower-bound-{which}",
            arms=[steady] * L + [rising] * L,
            sigma=0.0,
            horizon=T,
            family=_replicated_family(L),
            concave_certified=True,
            metadata={"generator": "lower-bound-pair", "variant": which, "L": L, "breakpoint": breakpoints[which]},
        )

    if variant is not None:
        return build(variant)
    return build("A"), build("B")


def constrained_pair_parameters(T: int, c: float) -> Dict[str, float]:
    """
    Breakpoint P, gap epsilon and scale of the constrained pair.

    The rising arm is scale * sum_{n<=m} (n+1)^(-c) with scale = min(1, 1/mu_raw(T)) so
    it stays in [0, 1]. epsilon balances the two instances:
    (mu(P) - eps) * P - F(P) = F(T) - F(T-P) - (mu(P) - eps) * P.
    """
    _require(1 < c < 2, f"c must lie in (1, 2), got {c}")
    _require(T >= 4, f"T must be at least 4, got {T}")

    terms = np.power(np.arange(2, T + 2, dtype=float), -c)
    scale = min(1.0, 1.0 / float(np.sum(terms)))
    # Same arithmetic as PowerLawSaturating so the frozen plateau matches mu(P) exactly.
    mu = np.cumsum(scale * terms)
    prefix = np.concatenate(([0.0], np.cumsum(mu)))

    P = int(round((2.0 - c) ** (1.0 / (c - 1.0)) * T))
    P = min(max(P, 1), T - 1)
    mu_P = float(mu[P - 1])
    F_P, F_T, F_TP = float(prefix[P]), float(prefix[T]), float(prefix[T - P])

    def imbalance(eps: float) -> float:
        return ((mu_P - eps) * P - F_P) - (F_T - F_TP - (mu_P - eps) * P)

    if not imbalance(0.0) > 0 or not imbalance(mu_P) < 0:
        raise ConstructionError(f"No gap in (0, mu(P)) balances the constrained pair for T={T}, c={c}.")
    eps = brentq(imbalance, 0.0, mu_P, xtol=1e-15, rtol=4 * np.finfo(float).eps)

    residual = abs(imbalance(eps))
    if not (0 < eps < mu_P) or residual > BALANCE_TOLERANCE * max(1.0, F_T):
        raise ConstructionError(f"Balance equation residual {residual:.3g} for eps={eps:.6g} (T={T}, c={c}).")

    return {"P": P, "epsilon": float(eps), "mu_P": mu_P, "scale": scale}


def make_constrained_pair(T: int, c: float, L: int = 1, variant: Optional[Literal["A", "B"]] = None) -> Union[Tuple[BanditInstance, BanditInstance], BanditInstance]:
    """
    Lower-bound pair inside the increment envelope gamma(n-1) <= (n+1)^(-c).

    A: constant mu(P) - eps against the full rising curve.
    B: the same constant against the curve frozen at mu(P) after P pulls.
    """
    _require(L >= 1, f"L must be at least 1, got {L}")
    params = constrained_pair_parameters(T, c)
    mu_P, eps, scale = params["mu_P"], params["epsilon"], params["scale"]

    def build(which: str) -> BanditInstance:
        steady = Constant(value=mu_P - eps, horizon=T)
        plateau = 1.0 if which == "A" else mu_P
        rising = PowerLawSaturating(base=0.0, amplitude=scale, exponent=c, offset=1, plateau=plateau, horizon=T)
        return BanditInstance(
            name=f"constrained-{which}",
            arms=[steady] * L + [rising] * L,
            sigma=0.0,
            horizon=T,
            family=_replicated_family(L),
            concave_certified=True,
            metadata={"generator": "constrained-pair", "variant": which, "L": L, "c": c, **params},
        )

    logger.info(f"Constrained pair T={T}, c={c}: P={params['P']}, eps={eps:.6g}, scale={scale:.6g}")
    if variant is not None:
        return build(variant)
    return build("A"), build("B")


def make_kmax_counterexample(T: int) -> BanditInstance:
    """Three arms under the K-max reward where switching super arms beats every constant policy."""
    _require(T >= 1000, f"T must be at least 1000, got {T}")
    arms = [
        PiecewiseLinearSaturating(slope=10.0 / T, plateau=1.0, horizon=T),
        PiecewiseLinearSaturating(slope=0.1, kink=1, plateau=0.9, horizon=T),
        Constant(value=0.5, horizon=T),
    ]
    return BanditInstance(
        name="kmax-counterexample",
        arms=arms,
        sigma=0.0,
        horizon=T,
        family=SuperArmFamily(sense="maximize", reward="kmax", subsets=[(0, 1), (0, 2), (1, 2)]),
        concave_certified=True,
        metadata={"generator": "kmax-counterexample"},
    )


def make_two_singletons(mu_a: List[float], mu_b: List[float], sigma: float = 0.0) -> BanditInstance:
    """Two tabulated arms, each its own super arm."""
    _require(len(mu_a) == len(mu_b) and len(mu_a) >= 1, "Both tables must be non-empty and of equal length")
    return BanditInstance(
        name="two-singletons",
        arms=[Tabulated(table=list(mu_a)), Tabulated(table=list(mu_b))],
        sigma=sigma,
        horizon=len(mu_a),
        family=SuperArmFamily(sense="maximize", subsets=[(0,), (1,)]),
        metadata={"generator": "two-singletons"},
    )


GENERATORS: Dict[str, Callable[..., Any]] = {
    "synthetic": make_synthetic_instance,
    "lower-bound-pair": make_lower_bound_pair,
    "constrained-pair": make_constrained_pair,
    "kmax-counterexample": make_kmax_counterexample,
    "two-singletons": make_two_singletons,
}


def list_generators() -> List[GeneratorInfo]:
    return [
        GeneratorInfo(name="synthetic", description="Late bloomer vs early peakers on a graph task",
                      parameters={"c": "1.1", "T": "200000", "lb_start": "0.0", "lb_end": "0.92",
                                  "ep_level": "0.8", "sigma": "0.01", "graph": "shortest_path | spanning_tree | matching | {...}"}),
        GeneratorInfo(name="lower-bound-pair", description="Linear-growth pair sharing the first T/3 pulls",
                      parameters={"T": "required", "L": "1", "variant": "A | B"}),
        GeneratorInfo(name="constrained-pair", description="Lower-bound pair with increments bounded by (n+1)^-c",
                      parameters={"T": "required", "c": "(1, 2)", "L": "1", "variant": "A | B"}),
        GeneratorInfo(name="kmax-counterexample", description="Non-additive reward where constant policies are suboptimal",
                      parameters={"T": ">= 1000"}),
        GeneratorInfo(name="two-singletons", description="Two tabulated arms as singleton super arms",
                      parameters={"mu_a": "list", "mu_b": "list", "sigma": "0.0"}),
    ]


def build_from_generator(name: str, params: Dict[str, Any]) -> BanditInstance:
    """Instantiate a catalog generator; pair generators need a 'variant'."""
    if name not in GENERATORS:
        raise ParameterError(f"Unknown generator: {name}. Available: {sorted(GENERATORS)}")
    if name in ("lower-bound-pair", "constrained-pair") and "variant" not in params:
        raise ParameterError(f"Generator '{name}' needs a 'variant' of 'A' or 'B'")
    try:
        return GENERATORS[name](**params)
    except TypeError as e:
        raise ParameterError(f"Bad parameters for generator '{name}': {e}")
