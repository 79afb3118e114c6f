"""Bipartite support graphs: construction, acyclicity, component structure.

A coupling's support induces a bipartite graph with one node per touched row
site, one per touched column site, and one edge per positive entry.  The
coupling is an extreme point of its transportation polytope exactly when this
graph is a forest; a witness alternating cycle is produced otherwise.

Nodes are encoded as ``("x", i)`` / ``("y", j)`` pairs wherever both sides
appear in one collection; the lexicographic order on these pairs (all x nodes
first, each side by index) fixes every traversal order, so reported witnesses
are deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

from .measures import Coupling

Node = tuple[str, int]


@dataclass(frozen=True)
class SupportGraph:
    """Bipartite graph on the sites touched by at least one edge."""

    x_nodes: frozenset[int]
    y_nodes: frozenset[int]
    edges: frozenset[tuple[int, int]]

    def __init__(self, edges):
        edges = frozenset((int(i), int(j)) for i, j in edges)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "x_nodes", frozenset(i for i, _ in edges))
        object.__setattr__(self, "y_nodes", frozenset(j for _, j in edges))

    @cached_property
    def x_adjacency(self) -> dict[int, tuple[int, ...]]:
        adj: dict[int, list[int]] = {i: [] for i in self.x_nodes}
        for i, j in self.edges:
            adj[i].append(j)
        return {i: tuple(sorted(js)) for i, js in adj.items()}

    @cached_property
    def y_adjacency(self) -> dict[int, tuple[int, ...]]:
        adj: dict[int, list[int]] = {j: [] for j in self.y_nodes}
        for i, j in self.edges:
            adj[j].append(i)
        return {j: tuple(sorted(is_)) for j, is_ in adj.items()}

    @cached_property
    def nodes(self) -> tuple[Node, ...]:
        xs = [("x", i) for i in sorted(self.x_nodes)]
        ys = [("y", j) for j in sorted(self.y_nodes)]
        return tuple(xs + ys)

    def neighbors(self, node: Node) -> tuple[Node, ...]:
        side, idx = node
        if side == "x":
            return tuple(("y", j) for j in self.x_adjacency[idx])
        return tuple(("x", i) for i in self.y_adjacency[idx])

    @cached_property
    def n_nodes(self) -> int:
        return len(self.x_nodes) + len(self.y_nodes)

    @cached_property
    def n_edges(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class ForestReport:
    """Outcome of the acyclicity test.

    ``witness_cycle`` is ``None`` for forests; otherwise a tuple
    ``(x_1, y_1, x_2, y_2, ..., x_k, y_k)`` with ``k >= 2`` whose ``2k``
    edges, read as ``(x_t, y_t)`` and ``(x_{t+1}, y_t)`` with indices wrapping,
    all belong to the graph.
    """

    is_forest: bool
    components: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]
    witness_cycle: tuple[int, ...] | None


def build_support_graph(coupling: Coupling) -> SupportGraph:
    """Graph with one edge per positive coupling entry.

    Sites with zero marginal weight have no edges and therefore do not
    appear as nodes.
    """
    return SupportGraph(coupling.support)


def connected_components(graph: SupportGraph) -> tuple[frozenset[Node], ...]:
    """Connected components in deterministic (lexicographic seed) order."""
    seen: set[Node] = set()
    comps: list[frozenset[Node]] = []
    for start in graph.nodes:
        if start in seen:
            continue
        stack = [start]
        comp: set[Node] = set()
        while stack:
            u = stack.pop()
            if u in comp:
                continue
            comp.add(u)
            for v in graph.neighbors(u):
                if v not in comp:
                    stack.append(v)
        seen |= comp
        comps.append(frozenset(comp))
    return tuple(comps)


def acyclicity_test(graph: SupportGraph) -> ForestReport:
    """Decide whether the bipartite graph is a forest.

    Runs an iterative DFS with sorted adjacency; the first back edge in
    lexicographic order yields the reported witness cycle, so the output is
    reproducible for a fixed edge set.
    """
    parent: dict[Node, Node | None] = {}
    witness: tuple[int, ...] | None = None

    for start in graph.nodes:
        if start in parent:
            continue
        parent[start] = None
        # stack of (node, iterator position) realized as explicit index
        stack: list[tuple[Node, int]] = [(start, 0)]
        while stack and witness is None:
            u, k = stack.pop()
            nbrs = graph.neighbors(u)
            while k < len(nbrs):
                v = nbrs[k]
                k += 1
                if v not in parent:
                    parent[v] = u
                    stack.append((u, k))
                    stack.append((v, 0))
                    break
                if parent[u] != v:
                    # Back edge u-v: the tree path between them closes a cycle.
                    witness = _extract_cycle(parent, u, v)
                    break
            else:
                continue
        if witness is not None:
            break

    comps = connected_components(graph)
    comp_pairs = tuple(
        (
            tuple(sorted(i for s, i in comp if s == "x")),
            tuple(sorted(j for s, j in comp if s == "y")),
        )
        for comp in comps
    )
    return ForestReport(is_forest=witness is None, components=comp_pairs, witness_cycle=witness)


def _extract_cycle(parent: dict[Node, Node | None], u: Node, v: Node) -> tuple[int, ...]:
    """Alternating cycle through the back edge ``u-v`` and the DFS tree."""
    path_u = _path_to_root(parent, u)
    path_v = _path_to_root(parent, v)
    anc_u = {node: d for d, node in enumerate(path_u)}
    lca_d_v = next(d for d, node in enumerate(path_v) if node in anc_u)
    lca = path_v[lca_d_v]
    # Cycle as a node sequence: u .. lca .. v, then the back edge closes it.
    nodes = path_u[: anc_u[lca] + 1] + list(reversed(path_v[:lca_d_v]))
    # Rotate so the sequence starts at an x node; it alternates sides.
    if nodes[0][0] == "y":
        nodes = nodes[1:] + nodes[:1]
    flat = tuple(idx for _, idx in nodes)
    # Canonical: start the cycle at its lexicographically smallest (x, y) edge.
    k = len(flat) // 2
    best = min(range(k), key=lambda t: (flat[2 * t], flat[2 * t + 1]))
    flat = flat[2 * best :] + flat[: 2 * best]
    return flat


def _path_to_root(parent: dict[Node, Node | None], node: Node) -> list[Node]:
    path = [node]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])  # type: ignore[arg-type]
    return path


def forest_identity_holds(graph: SupportGraph, report: ForestReport) -> bool:
    """Counting cross-check: a graph is a forest iff ``E = N - C``."""
    return report.is_forest == (graph.n_edges == graph.n_nodes - len(report.components))
