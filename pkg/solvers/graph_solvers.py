import heapq
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from environments.instance import BipartiteMatchingTask, DagShortestPath, SpanningTreeTask

logger = logging.getLogger(__name__)

MATCHING_TOLERANCE = 1e-9


class SolverError(ValueError):
    """Base error for combinatorial solvers."""
    pass


class InfeasibleError(SolverError):
    """Raised when no feasible super arm exists for the given graph."""
    pass


def topological_order(nodes: int, edges: Sequence[Tuple[int, int]]) -> List[int]:
    """Kahn's algorithm, smallest ready node first so the order is deterministic."""
    indegree = [0] * nodes
    outgoing: List[List[int]] = [[] for _ in range(nodes)]
    for u, v in edges:
        outgoing[u].append(v)
        indegree[v] += 1

    ready = [n for n in range(nodes) if indegree[n] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        u = heapq.heappop(ready)
        order.append(u)
        for v in outgoing[u]:
            indegree[v] -= 1
            if indegree[v] == 0:
                heapq.heappush(ready, v)

    if len(order) != nodes:
        raise SolverError("Graph contains a cycle; shortest-path tasks require a DAG.")
    return order


def dag_shortest_path(graph: DagShortestPath, costs: Sequence[float]) -> Tuple[int, ...]:
    """
    Minimum-cost source-to-sink path by dynamic programming over a topological order.

    Costs may be negative. Among equal-cost paths the lexicographically smallest
    sorted edge tuple wins: each edge i carries the tie weight 2^(K-1-i) and the
    path with the largest total tie weight is preferred. Distinct paths of a DAG are
    never subsets of one another, so this is exactly lexicographic order.
    """
    num_edges = len(graph.edges)
    if len(costs) != num_edges:
        raise SolverError(f"Expected {num_edges} edge costs, got {len(costs)}.")

    incoming: List[List[int]] = [[] for _ in range(graph.nodes)]
    for idx, (_, v) in enumerate(graph.edges):
        incoming[v].append(idx)

    # best[v] = (cost, -tie_weight); tie weights are exact Python ints
    best: List[Optional[Tuple[float, int]]] = [None] * graph.nodes
    via: List[Optional[int]] = [None] * graph.nodes
    best[graph.source] = (0.0, 0)

    for v in topological_order(graph.nodes, graph.edges):
        if v == graph.source:
            continue
        for idx in incoming[v]:
            u = graph.edges[idx][0]
            if best[u] is None:
                continue
            candidate = (best[u][0] + float(costs[idx]), best[u][1] - (1 << (num_edges - 1 - idx)))
            if best[v] is None or candidate < best[v]:
                best[v] = candidate
                via[v] = idx

    if best[graph.sink] is None:
        raise InfeasibleError(f"No path from node {graph.source} to node {graph.sink}.")

    path = []
    node = graph.sink
    while node != graph.source:
        idx = via[node]
        path.append(idx)
        node = graph.edges[idx][0]
    return tuple(sorted(path))


class DisjointSet:
    """Union-find with path compression and union by rank."""

    def __init__(self, size: int):
        self.parent = list(range(size))
        self.rank = [0] * size

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True


def kruskal_mst(graph: SpanningTreeTask, costs: Sequence[float]) -> Tuple[int, ...]:
    """Minimum spanning tree; equal costs are taken in increasing edge index."""
    if len(costs) != len(graph.edges):
        raise SolverError(f"Expected {len(graph.edges)} edge costs, got {len(costs)}.")

    order = sorted(range(len(graph.edges)), key=lambda i: (float(costs[i]), i))
    components = DisjointSet(graph.nodes)
    tree = []
    for idx in order:
        u, v = graph.edges[idx]
        if components.union(u, v):
            tree.append(idx)
            if len(tree) == graph.nodes - 1:
                break

    if len(tree) != graph.nodes - 1:
        raise InfeasibleError("Graph is disconnected; no spanning tree exists.")
    return tuple(sorted(tree))


def _weight_matrix(graph: BipartiteMatchingTask, weights: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Dense weight matrix keeping, per vertex pair, the heaviest edge (lowest index on ties)."""
    matrix = np.zeros((graph.left, graph.right))
    edge_at = np.full((graph.left, graph.right), -1, dtype=int)
    for idx, (u, v) in enumerate(graph.edges):
        w = float(weights[idx])
        if w < 0:
            continue
        if edge_at[u, v] < 0 or w > matrix[u, v]:
            matrix[u, v] = w
            edge_at[u, v] = idx
    return matrix, edge_at


def _best_residual_value(matrix: np.ndarray, rows: List[int], cols: List[int]) -> float:
    if not rows or not cols:
        return 0.0
    sub = matrix[np.ix_(rows, cols)]
    r, c = linear_sum_assignment(sub, maximize=True)
    return float(sub[r, c].sum())


def max_weight_bipartite_matching(graph: BipartiteMatchingTask, weights: Sequence[float]) -> Tuple[int, ...]:
    """
    Maximum-weight matching via shortest augmenting paths (scipy's assignment solver).

    Negative-weight edges are never used. Among optimal matchings the edges are
    fixed greedily in increasing index, keeping an edge whenever the optimum is
    still reachable with it, so zero-weight edges are added while they fit and the
    result is maximal over the usable edges.
    """
    if len(weights) != len(graph.edges):
        raise SolverError(f"Expected {len(graph.edges)} edge weights, got {len(weights)}.")

    matrix, edge_at = _weight_matrix(graph, weights)
    optimum = _best_residual_value(matrix, list(range(graph.left)), list(range(graph.right)))

    chosen: List[int] = []
    used_left, used_right = set(), set()
    fixed_value = 0.0
    for idx, (u, v) in enumerate(graph.edges):
        if u in used_left or v in used_right or edge_at[u, v] != idx:
            continue
        rows = [r for r in range(graph.left) if r not in used_left and r != u]
        cols = [c for c in range(graph.right) if c not in used_right and c != v]
        value = fixed_value + matrix[u, v] + _best_residual_value(matrix, rows, cols)
        if value >= optimum - MATCHING_TOLERANCE:
            chosen.append(idx)
            used_left.add(u)
            used_right.add(v)
            fixed_value += matrix[u, v]

    logger.debug(f"Matching with weight {fixed_value:.6g} (optimum {optimum:.6g}): {chosen}")
    return tuple(sorted(chosen))
