import itertools
import logging
from typing import List, Tuple

from environments.instance import (
    BipartiteMatchingTask,
    DagShortestPath,
    SpanningTreeTask,
    SuperArmFamily,
)

from .graph_solvers import DisjointSet, SolverError

logger = logging.getLogger(__name__)

DEFAULT_ENUMERATION_CAP = 10_000


class EnumerationOverflowError(SolverError):
    """Raised when a family has more super arms than the enumeration cap allows."""

    def __init__(self, found: int, cap: int):
        self.found = found
        self.cap = cap
        super().__init__(f"Super-arm family has at least {found} members, above the enumeration cap of {cap}.")


def _dag_paths(graph: DagShortestPath, cap: int) -> List[Tuple[int, ...]]:
    outgoing: List[List[int]] = [[] for _ in range(graph.nodes)]
    for idx, (u, _) in enumerate(graph.edges):
        outgoing[u].append(idx)

    paths: List[Tuple[int, ...]] = []
    stack: List[Tuple[int, Tuple[int, ...]]] = [(graph.source, ())]
    while stack:
        node, prefix = stack.pop()
        if node == graph.sink:
            paths.append(tuple(sorted(prefix)))
            if len(paths) > cap:
                raise EnumerationOverflowError(len(paths), cap)
            continue
        for idx in reversed(outgoing[node]):
            stack.append((graph.edges[idx][1], prefix + (idx,)))
    return paths


def _spanning_trees(graph: SpanningTreeTask, cap: int) -> List[Tuple[int, ...]]:
    trees: List[Tuple[int, ...]] = []
    for combo in itertools.combinations(range(len(graph.edges)), graph.nodes - 1):
        components = DisjointSet(graph.nodes)
        if all(components.union(*graph.edges[idx]) for idx in combo):
            trees.append(combo)
            if len(trees) > cap:
                raise EnumerationOverflowError(len(trees), cap)
    return trees


def _maximal_matchings(graph: BipartiteMatchingTask, cap: int) -> List[Tuple[int, ...]]:
    matchings: List[Tuple[int, ...]] = []

    def is_maximal(used_left: set, used_right: set) -> bool:
        return all(u in used_left or v in used_right for u, v in graph.edges)

    def extend(start: int, chosen: List[int], used_left: set, used_right: set) -> None:
        if is_maximal(used_left, used_right):
            matchings.append(tuple(chosen))
            if len(matchings) > cap:
                raise EnumerationOverflowError(len(matchings), cap)
            return
        for idx in range(start, len(graph.edges)):
            u, v = graph.edges[idx]
            if u in used_left or v in used_right:
                continue
            extend(idx + 1, chosen + [idx], used_left | {u}, used_right | {v})

    extend(0, [], set(), set())
    return matchings


def enumerate_super_arms(family: SuperArmFamily, cap: int = DEFAULT_ENUMERATION_CAP) -> List[Tuple[int, ...]]:
    """All feasible super arms as sorted tuples, in lexicographic order."""
    if family.is_explicit:
        if len(family.subsets) > cap:
            raise EnumerationOverflowError(len(family.subsets), cap)
        arms = {tuple(sorted(set(s))) for s in family.subsets}
    elif isinstance(family.graph, DagShortestPath):
        arms = set(_dag_paths(family.graph, cap))
    elif isinstance(family.graph, SpanningTreeTask):
        arms = set(_spanning_trees(family.graph, cap))
    elif isinstance(family.graph, BipartiteMatchingTask):
        arms = set(_maximal_matchings(family.graph, cap))
    else:
        raise SolverError(f"Unknown super-arm family: {family.graph}")

    result = sorted(arms)
    logger.debug(f"Enumerated {len(result)} super arms")
    return result
