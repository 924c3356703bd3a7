"""Finite topological graphs with oriented edges.

Edge ``i`` (0-based) runs from ``edges[i][0]`` to ``edges[i][1]``; the signed
edge ``i + 1`` traverses it forwards and ``-(i + 1)`` backwards.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from functools import cached_property

EdgePath = tuple[int, ...]


def edge_index(E: int) -> int:
    return abs(E) - 1


@dataclass(frozen=True)
class TopologicalGraph:
    num_vertices: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        for o, t in self.edges:
            if not (0 <= o < self.num_vertices and 0 <= t < self.num_vertices):
                raise ValueError("edge endpoint out of range")

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def rank(self) -> int:
        return self.num_edges - self.num_vertices + 1

    def origin(self, E: int) -> int:
        o, t = self.edges[edge_index(E)]
        return o if E > 0 else t

    def terminus(self, E: int) -> int:
        o, t = self.edges[edge_index(E)]
        return t if E > 0 else o

    @cached_property
    def star(self) -> tuple[tuple[int, ...], ...]:
        """Signed edges leaving each vertex (a loop contributes both directions)."""
        out: list[list[int]] = [[] for _ in range(self.num_vertices)]
        for i, (o, t) in enumerate(self.edges):
            out[o].append(i + 1)
            out[t].append(-(i + 1))
        return tuple(tuple(s) for s in out)

    def valence(self, v: int) -> int:
        return len(self.star[v])

    def is_connected(self) -> bool:
        return len(self.component(0, range(self.num_edges))) == self.num_vertices

    def component(self, v: int, allowed) -> set[int]:
        allowed = set(allowed)
        seen, stack = {v}, [v]
        while stack:
            u = stack.pop()
            for E in self.star[u]:
                if edge_index(E) in allowed:
                    w = self.terminus(E)
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
        return seen

    def is_path(self, path: EdgePath) -> bool:
        return all(self.terminus(a) == self.origin(b) for a, b in zip(path, path[1:]))

    def canonical_form(self) -> tuple:
        best = None
        for perm in itertools.permutations(range(self.num_vertices)):
            key = tuple(sorted(tuple(sorted((perm[o], perm[t]))) for o, t in self.edges))
            if best is None or key < best:
                best = key
        return best


def spanning_trees(g: TopologicalGraph) -> list[frozenset[int]]:
    """All spanning trees as sets of edge indices, in lexicographic order."""
    need = g.num_vertices - 1
    candidates = [i for i, (o, t) in enumerate(g.edges) if o != t]
    trees = []
    for combo in itertools.combinations(candidates, need):
        parent = list(range(g.num_vertices))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        ok = True
        for i in combo:
            a, b = find(g.edges[i][0]), find(g.edges[i][1])
            if a == b:
                ok = False
                break
            parent[a] = b
        if ok:
            trees.append(frozenset(combo))
    return trees


def tree_paths(g: TopologicalGraph, tree: frozenset[int], root: int = 0) -> list[EdgePath]:
    """``paths[v]`` is the reduced edge path from ``root`` to ``v`` inside the tree."""
    paths: list[EdgePath | None] = [None] * g.num_vertices
    paths[root] = ()
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for E in g.star[u]:
            if edge_index(E) in tree:
                w = g.terminus(E)
                if paths[w] is None:
                    paths[w] = paths[u] + (E,)
                    queue.append(w)
    if any(p is None for p in paths):
        raise ValueError("not a spanning tree")
    return paths  # type: ignore[return-value]


def reduce_path(path) -> EdgePath:
    out: list[int] = []
    for E in path:
        if out and out[-1] == -E:
            out.pop()
        else:
            out.append(E)
    return tuple(out)


def rose(n: int) -> TopologicalGraph:
    return TopologicalGraph(1, tuple((0, 0) for _ in range(n)))


def core_graphs(n: int) -> list[TopologicalGraph]:
    """Isomorphism classes of connected rank-n graphs with every valence >= 3.

    The rank-1 rose (valence 2) is included for ``n == 1``.
    """
    if n == 1:
        return [rose(1)]
    found = {}
    for nv in range(1, 2 * n - 1):
        ne = nv + n - 1
        pairs = [(i, j) for i in range(nv) for j in range(i, nv)]
        for combo in itertools.combinations_with_replacement(pairs, ne):
            g = TopologicalGraph(nv, combo)
            if any(g.valence(v) < 3 for v in range(nv)) or not g.is_connected():
                continue
            key = g.canonical_form()
            if key not in found:
                found[key] = TopologicalGraph(nv, key)
    return [found[k] for k in sorted(found)]
