import logging
from typing import Sequence, Tuple

import numpy as np

from environments.instance import (
    BipartiteMatchingTask,
    DagShortestPath,
    SpanningTreeTask,
    SuperArmFamily,
)

from .graph_solvers import (
    DisjointSet,
    SolverError,
    dag_shortest_path,
    kruskal_mst,
    max_weight_bipartite_matching,
)

logger = logging.getLogger(__name__)


def effective_weights(family: SuperArmFamily, weights: Sequence[float], slack: float = 0.0) -> np.ndarray:
    """Weights as the objective sees them: raw when maximizing, clipped to [0, 1 + slack] when minimizing."""
    w = np.asarray(weights, dtype=float)
    if family.sense == "minimize":
        return np.clip(w, 0.0, 1.0 + slack)
    return w


def objective(family: SuperArmFamily, weights: Sequence[float], super_arm: Sequence[int], slack: float = 0.0) -> float:
    """
    Value the solver maximizes for a super arm.

    Maximize: sum of weights. Minimize: sum of (w - 1), i.e. minus the total edge
    cost 1 - w. The slack only widens the clipping range of the weights.
    """
    w = effective_weights(family, weights, slack)
    idx = list(super_arm)
    if family.sense == "minimize":
        return float(np.sum(w[idx] - 1.0))
    return float(np.sum(w[idx]))


def _solve_explicit(family: SuperArmFamily, weights: Sequence[float], slack: float) -> Tuple[int, ...]:
    best_key = None
    best_arm = None
    for subset in family.subsets:
        arm = tuple(sorted(set(subset)))
        key = (-objective(family, weights, arm, slack), arm)
        if best_key is None or key < best_key:
            best_key, best_arm = key, arm
    if best_arm is None:
        raise SolverError("Explicit family has no super arms.")
    return best_arm


def solve(family: SuperArmFamily, weights: Sequence[float], slack: float = 0.0) -> Tuple[int, ...]:
    """
    Best super arm for the given per-arm weights.

    Ties go to the lexicographically smallest sorted index tuple (matchings fix
    edges greedily in increasing index instead). A positive slack widens the
    clipping range of minimize families so exploration weights above 1 give
    negative edge costs; the cost itself is always 1 - w.
    """
    if family.is_explicit:
        return _solve_explicit(family, weights, slack)

    graph = family.graph
    if len(weights) != len(graph.edges):
        raise SolverError(f"Expected {len(graph.edges)} weights, got {len(weights)}.")
    w = effective_weights(family, weights, slack)

    if isinstance(graph, BipartiteMatchingTask):
        if family.sense == "minimize":
            raise SolverError("Matching families only support the maximize sense.")
        return max_weight_bipartite_matching(graph, w)

    costs = 1.0 - w if family.sense == "minimize" else -w
    if isinstance(graph, DagShortestPath):
        return dag_shortest_path(graph, costs)
    if isinstance(graph, SpanningTreeTask):
        return kruskal_mst(graph, costs)
    raise SolverError(f"Unknown graph task: {type(graph).__name__}")


def _is_source_sink_path(graph: DagShortestPath, super_arm: Tuple[int, ...]) -> bool:
    successor = {}
    for idx in super_arm:
        u, v = graph.edges[idx]
        if u in successor:
            return False
        successor[u] = v
    node, steps = graph.source, 0
    while node in successor and steps <= len(super_arm):
        node = successor[node]
        steps += 1
    return node == graph.sink and steps == len(super_arm)


def _is_spanning_tree(graph: SpanningTreeTask, super_arm: Tuple[int, ...]) -> bool:
    if len(super_arm) != graph.nodes - 1:
        return False
    components = DisjointSet(graph.nodes)
    return all(components.union(*graph.edges[idx]) for idx in super_arm)


def _is_maximal_matching(graph: BipartiteMatchingTask, super_arm: Tuple[int, ...]) -> bool:
    left = [graph.edges[idx][0] for idx in super_arm]
    right = [graph.edges[idx][1] for idx in super_arm]
    if len(set(left)) != len(left) or len(set(right)) != len(right):
        return False
    used_left, used_right = set(left), set(right)
    return all(u in used_left or v in used_right for u, v in graph.edges)


def is_feasible(family: SuperArmFamily, super_arm: Sequence[int]) -> bool:
    """Membership test for the family; results are cached per super arm."""
    key = tuple(super_arm)
    cached = family.cached_membership(key)
    if cached is not None:
        return cached

    if list(key) != sorted(set(key)) or not key:
        feasible = False
    elif family.is_explicit:
        feasible = key in {tuple(sorted(set(s))) for s in family.subsets}
    elif any(i < 0 or i >= len(family.graph.edges) for i in key):
        feasible = False
    elif isinstance(family.graph, DagShortestPath):
        feasible = _is_source_sink_path(family.graph, key)
    elif isinstance(family.graph, SpanningTreeTask):
        feasible = _is_spanning_tree(family.graph, key)
    else:
        feasible = _is_maximal_matching(family.graph, key)

    family.remember_membership(key, feasible)
    return feasible
