"""Points of outer space as marked metric graphs, candidate loops and displacement.

A marking sends generator ``i`` to a closed tight edge path at the base vertex.
Lengths are exact Fractions throughout.
"""

from __future__ import annotations

import functools
import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _kernels
from ._simplex import feasible_point
from .freegroup import Automorphism, Word, apply, cyclic_reduce, invert, reduce
from .graphs import EdgePath, TopologicalGraph, edge_index, reduce_path, rose, spanning_trees, tree_paths

LENGTH_FLOOR = Fraction(1, 10**7)
BISECTION_TOL = Fraction(1, 10**10)


class GraphError(ValueError):
    """Inconsistent graph, path or marking data."""


def cyclic_tighten(path: Sequence[int]) -> EdgePath:
    """Remove backtracking, including across the cyclic joint."""
    p = list(reduce_path(path))
    while len(p) > 1 and p[0] == -p[-1]:
        p = p[1:-1]
    return tuple(p)


def _rotate_min(loop: EdgePath) -> EdgePath:
    if not loop:
        return loop
    return min(loop[i:] + loop[:i] for i in range(len(loop)))


def _canonical_loop(loop: EdgePath) -> EdgePath:
    """Least rotation of the loop or its reverse (loops are stored up to inversion)."""
    rev = tuple(-E for E in reversed(loop))
    return min(_rotate_min(loop), _rotate_min(rev))


@dataclass(frozen=True)
class SimplexSpec:
    """A topological type: graph, marking and the spanning tree used for coordinates."""

    graph: TopologicalGraph
    marking: tuple[EdgePath, ...]
    base: int = 0

    @functools.cached_property
    def tree(self) -> frozenset[int]:
        return spanning_trees(self.graph)[0]

    @functools.cached_property
    def tree_paths(self) -> list[EdgePath]:
        return tree_paths(self.graph, self.tree, self.base)

    @functools.cached_property
    def letters(self) -> dict[int, int]:
        """Edge index -> petal letter for edges outside the tree."""
        out = [i for i in range(self.graph.num_edges) if i not in self.tree]
        return {e: k + 1 for k, e in enumerate(out)}

    def path_word(self, path: Sequence[int]) -> Word:
        return reduce(
            self.letters[edge_index(E)] * (1 if E > 0 else -1)
            for E in path
            if edge_index(E) in self.letters
        )

    @functools.cached_property
    def mu(self) -> Automorphism:
        """Marking in edge-letter coordinates: generator -> word in non-tree edges."""
        return Automorphism(tuple(self.path_word(p) for p in self.marking))

    @functools.cached_property
    def mu_inverse(self) -> Automorphism:
        return invert(self.mu)

    def loop_word(self, loop: EdgePath) -> Word:
        """Cyclic basis word carried by a loop."""
        v = self.graph.origin(loop[0])
        tp = self.tree_paths[v]
        closed = tp + tuple(loop) + tuple(-E for E in reversed(tp))
        return cyclic_reduce(apply(self.mu_inverse, self.path_word(closed)))

    @property
    def rank(self) -> int:
        return self.graph.rank


@dataclass(frozen=True)
class Candidate:
    loop: EdgePath
    kind: str  # simple | infinity | barbell

    def counts(self, num_edges: int) -> tuple[int, ...]:
        c = [0] * num_edges
        for E in self.loop:
            c[edge_index(E)] += 1
        return tuple(c)


def simple_cycles(g: TopologicalGraph) -> list[EdgePath]:
    """Embedded circles, one orientation each, canonically rotated."""
    found = {}
    for s in range(g.num_vertices):
        stack = [(s, (), frozenset([s]))]
        while stack:
            v, path, seen = stack.pop()
            used = {edge_index(E) for E in path}
            for E in g.star[v]:
                if edge_index(E) in used:
                    continue
                w = g.terminus(E)
                if w == s:
                    cyc = path + (E,)
                    key = frozenset(edge_index(F) for F in cyc)
                    if key not in found:
                        found[key] = _canonical_loop(cyc)
                elif w > s and w not in seen:
                    stack.append((w, path + (E,), seen | {w}))
    return sorted(found.values(), key=lambda c: (len(c), c))


def _vertices(g: TopologicalGraph, loop: EdgePath) -> set[int]:
    return {g.origin(E) for E in loop}


def _rotate_to(g: TopologicalGraph, loop: EdgePath, v: int) -> EdgePath:
    for i in range(len(loop)):
        if g.origin(loop[i]) == v:
            return loop[i:] + loop[:i]
    raise GraphError("vertex not on loop")


def _arcs(g: TopologicalGraph, A: set[int], B: set[int]) -> list[EdgePath]:
    """Embedded arcs from A to B whose interiors avoid A and B."""
    out = []
    for a in A:
        stack = [(a, (), frozenset([a]))]
        while stack:
            v, path, seen = stack.pop()
            for E in g.star[v]:
                w = g.terminus(E)
                if w in seen or (w in A and w != a):
                    continue
                if w in B:
                    out.append(path + (E,))
                else:
                    stack.append((w, path + (E,), seen | {w}))
    return out


def _inv(p: EdgePath) -> EdgePath:
    return tuple(-E for E in reversed(p))


@functools.lru_cache(maxsize=256)
def candidate_loops(g: TopologicalGraph) -> tuple[Candidate, ...]:
    """Simple circles, figure-eights and barbells of ``g``.

    Figure-eights and barbells come in two relative orientations of the
    second circle; these are different conjugacy classes, so both are listed.
    """
    cycles = simple_cycles(g)
    out = [Candidate(c, "simple") for c in cycles]
    seen = {c for c in cycles}

    def push(loop, kind):
        key = _canonical_loop(loop)
        if key not in seen:
            seen.add(key)
            out.append(Candidate(key, kind))

    for c1, c2 in itertools.combinations(cycles, 2):
        if {edge_index(E) for E in c1} & {edge_index(E) for E in c2}:
            continue
        V1, V2 = _vertices(g, c1), _vertices(g, c2)
        common = V1 & V2
        if len(common) == 1:
            (v,) = common
            r1, r2 = _rotate_to(g, c1, v), _rotate_to(g, c2, v)
            push(r1 + r2, "infinity")
            push(r1 + _inv(r2), "infinity")
        elif not common:
            for arc in _arcs(g, V1, V2):
                r1 = _rotate_to(g, c1, g.origin(arc[0]))
                r2 = _rotate_to(g, c2, g.terminus(arc[-1]))
                push(r1 + arc + r2 + _inv(arc), "barbell")
                push(r1 + arc + _inv(r2) + _inv(arc), "barbell")
    return tuple(out)


def candidates(spec: SimplexSpec) -> tuple[Candidate, ...]:
    return candidate_loops(spec.graph)


@dataclass(frozen=True)
class MarkedMetricGraph:
    spec: SimplexSpec
    lengths: tuple[Fraction, ...]

    def __post_init__(self):
        lengths = tuple(Fraction(x) for x in self.lengths)
        object.__setattr__(self, "lengths", lengths)
        g = self.spec.graph
        if len(lengths) != g.num_edges:
            raise GraphError("expected %d lengths" % g.num_edges)
        if any(x <= 0 for x in lengths):
            raise GraphError("edge lengths must be positive")
        if not g.is_connected():
            raise GraphError("graph is disconnected")
        if len(self.spec.marking) != g.rank:
            raise GraphError("marking needs %d generators" % g.rank)
        for p in self.spec.marking:
            if not p or not g.is_path(p) or g.origin(p[0]) != self.spec.base or g.terminus(p[-1]) != self.spec.base:
                raise GraphError("marking path %r is not a closed path at the base" % (p,))
        try:
            self.spec.mu
        except ValueError:
            raise GraphError("marking does not generate the fundamental group") from None

    @classmethod
    def standard(cls, graph: TopologicalGraph, lengths=None, base: int = 0) -> "MarkedMetricGraph":
        """Marking read off the first spanning tree: generator k runs once over the k-th non-tree edge."""
        if lengths is None:
            lengths = [Fraction(1, graph.num_edges)] * graph.num_edges
        tree = spanning_trees(graph)[0]
        paths = tree_paths(graph, tree, base)
        marking = []
        for i in range(graph.num_edges):
            if i in tree:
                continue
            E = i + 1
            marking.append(reduce_path(paths[graph.origin(E)] + (E,) + _inv(paths[graph.terminus(E)])))
        return cls(SimplexSpec(graph, tuple(marking), base), tuple(lengths))

    @classmethod
    def uniform_rose(cls, n: int) -> "MarkedMetricGraph":
        return cls.standard(rose(n))

    @property
    def graph(self) -> TopologicalGraph:
        return self.spec.graph

    @property
    def marking(self) -> tuple[EdgePath, ...]:
        return self.spec.marking

    @property
    def rank(self) -> int:
        return self.graph.rank

    @property
    def volume(self) -> Fraction:
        return sum(self.lengths, Fraction(0))

    def with_lengths(self, lengths) -> "MarkedMetricGraph":
        return MarkedMetricGraph(self.spec, tuple(lengths))

    def scaled(self, c) -> "MarkedMetricGraph":
        return self.with_lengths(x * Fraction(c) for x in self.lengths)

    def normalized(self) -> "MarkedMetricGraph":
        return self.scaled(1 / self.volume)

    def path_length(self, path: Sequence[int]) -> Fraction:
        return sum((self.lengths[edge_index(E)] for E in path), Fraction(0))

    def marking_path(self, w: Word) -> EdgePath:
        """Tight path at the base representing the word ``w``."""
        out: list[int] = []
        for x in w:
            p = self.marking[x - 1] if x > 0 else _inv(self.marking[-x - 1])
            out.extend(p)
        return reduce_path(out)

    def act(self, phi: Automorphism) -> "MarkedMetricGraph":
        """The point with marking ``g -> path(phi(g))``, so that L(w) becomes L_X(phi(w))."""
        marking = tuple(self.marking_path(w) for w in phi.images)
        return MarkedMetricGraph(SimplexSpec(self.graph, marking, self.spec.base), self.lengths)

    def to_json(self) -> dict:
        return graph_to_json(self)


def realize(X: MarkedMetricGraph, w: Word) -> EdgePath:
    """Tight loop in X carrying the conjugacy class of ``w``."""
    loop = cyclic_tighten(X.marking_path(w))
    if not loop:
        raise GraphError("trivial conjugacy class has no loop")
    return loop


def loop_length(X: MarkedMetricGraph, loop: EdgePath) -> Fraction:
    if not loop:
        raise GraphError("empty loop")
    return X.path_length(loop)


def translation_length(X: MarkedMetricGraph, w: Word) -> Fraction:
    w = cyclic_reduce(w)
    if not w:
        return Fraction(0)
    return X.path_length(realize(X, w))


def _counts(m: int, loop: EdgePath) -> list[int]:
    c = [0] * m
    for E in loop:
        c[edge_index(E)] += 1
    return c


@functools.lru_cache(maxsize=4096)
def candidate_matrices(spec: SimplexSpec, phi: Automorphism, target: SimplexSpec | None = None):
    """Occurrence matrices: row i gives the image of candidate i (P) and the candidate itself (Q).

    The image is ``phi(word)`` realized in ``target`` (default: ``spec``).
    """
    target = spec if target is None else target
    m = spec.graph.num_edges
    proxy = MarkedMetricGraph(target, tuple([Fraction(1)] * target.graph.num_edges))
    P, Q = [], []
    for c in candidates(spec):
        w = apply(phi, spec.loop_word(c.loop))
        P.append(_counts(target.graph.num_edges, realize(proxy, w)))
        Q.append(_counts(m, c.loop))
    return tuple(map(tuple, P)), tuple(map(tuple, Q))


def _dot(row, lengths) -> Fraction:
    return sum((a * b for a, b in zip(row, lengths) if a), Fraction(0))


def stretch_factor(X: MarkedMetricGraph, Y: MarkedMetricGraph) -> Fraction:
    """Lambda(X, Y): maximal ratio L_Y / L_X over the candidates of X."""
    ident = Automorphism.identity(X.rank)
    P, Q = candidate_matrices(X.spec, ident, Y.spec)
    return max(_dot(p, Y.lengths) / _dot(q, X.lengths) for p, q in zip(P, Q))


def displacement(X: MarkedMetricGraph, phi: Automorphism) -> Fraction:
    """Lambda(X, phi X) as an exact rational."""
    P, Q = candidate_matrices(X.spec, phi)
    return max(_dot(p, X.lengths) / _dot(q, X.lengths) for p, q in zip(P, Q))


def displacement_float(spec: SimplexSpec, phi: Automorphism, lengths) -> np.ndarray:
    """Float displacement for a batch of length vectors (rows of ``lengths``)."""
    P, Q = candidate_matrices(spec, phi)
    Pa, Qa = np.asarray(P, dtype=np.float64), np.asarray(Q, dtype=np.float64)
    L = np.atleast_2d(np.asarray(lengths, dtype=np.float64))
    return _kernels.ratio_max_batch(Pa, Qa, L)


@dataclass(frozen=True)
class MinDisplacement:
    value: Fraction
    lengths: tuple[Fraction, ...]
    boundary: bool
    iterations: int


def _feasible(P, Q, t: Fraction, floor: Fraction, centered: bool = False):
    """Lengths l >= floor, sum l = 1, (P - tQ).l <= 0, or None.

    With ``centered`` the point maximizes the smallest length.
    """
    m = len(P[0])
    A = [[p - t * q for p, q in zip(pr, qr)] for pr, qr in zip(P, Q)]
    # shift l = floor + x so that x >= 0
    b = [-floor * sum(row) for row in A]
    if not centered:
        x = feasible_point(A, b, [[1] * m], [1 - m * floor], m)
        return None if x is None else tuple(floor + v for v in x)
    # extra variable s <= x_i for all i, maximised
    A2 = [row + [0] for row in A] + [[-int(i == j) for j in range(m)] + [1] for i in range(m)]
    b2 = b + [0] * m
    x = feasible_point(A2, b2, [[1] * m + [0]], [1 - m * floor], m + 1, maximize=[0] * m + [1])
    return None if x is None else tuple(floor + v for v in x[:m])


def min_displacement(
    spec: SimplexSpec, phi: Automorphism, floor: Fraction = LENGTH_FLOOR, tol: Fraction = BISECTION_TOL
) -> MinDisplacement:
    """Infimum of the displacement over the open simplex of ``spec``.

    Bisection on ``t`` with an exact feasibility test for
    ``L(phi g) <= t L(g)`` over all candidates ``g`` with lengths bounded
    below by ``floor`` (volume 1).  The reported lengths maximize the smallest
    edge among points at the final level; ``boundary`` is set when even that
    point lies within ten floors of a face, i.e. the infimum is approached in a
    thin direction.
    """
    P, Q = candidate_matrices(spec, phi)
    m = spec.graph.num_edges
    uniform = tuple([Fraction(1, m)] * m)

    def value(lengths):
        return max(_dot(p, lengths) / _dot(q, lengths) for p, q in zip(P, Q))

    hi = value(uniform)
    lo = Fraction(1)
    it = 0
    if hi > lo and _feasible(P, Q, lo, floor) is not None:
        hi = lo
    while hi - lo > tol:
        it += 1
        mid = (lo + hi) / 2
        pt = _feasible(P, Q, mid, floor)
        if pt is None:
            lo = mid
        else:
            hi = value(pt)
    best = uniform if value(uniform) <= hi else _feasible(P, Q, hi, floor, centered=True)
    boundary = min(best) <= 10 * floor
    return MinDisplacement(value(best), best, boundary, it)


def min_displacement_on_simplex(spec: SimplexSpec, phi: Automorphism, **kw):
    r = min_displacement(spec, phi, **kw)
    return r.value, r.lengths, r.boundary


def shortest_circle(X: MarkedMetricGraph) -> Fraction:
    return min(X.path_length(c) for c in simple_cycles(X.graph))


def is_thin(X: MarkedMetricGraph, eps) -> bool:
    return shortest_circle(X) < Fraction(eps) * X.volume


def thin_part(X: MarkedMetricGraph, eps) -> frozenset[int]:
    """Edges of all embedded circles shorter than ``eps * vol``."""
    bound = Fraction(eps) * X.volume
    edges: set[int] = set()
    for c in simple_cycles(X.graph):
        if X.path_length(c) < bound:
            edges.update(edge_index(E) for E in c)
    return frozenset(edges)


@dataclass(frozen=True)
class RoseCollapse:
    rose: MarkedMetricGraph
    tree: frozenset[int]
    petal_of_edge: dict


def adjacent_uniform_roses(X: MarkedMetricGraph) -> list[RoseCollapse]:
    """One uniform volume-1 rose per spanning tree, marking pushed through the collapse."""
    g = X.graph
    n = g.rank
    out = []
    for T in spanning_trees(g):
        petals = [i for i in range(g.num_edges) if i not in T]
        petal = {e: k + 1 for k, e in enumerate(petals)}
        marking = []
        for p in X.marking:
            q = [petal[edge_index(E)] * (1 if E > 0 else -1) for E in p if edge_index(E) in petal]
            marking.append(reduce_path(q))
        R = MarkedMetricGraph(SimplexSpec(rose(n), tuple(marking), 0), tuple([Fraction(1, n)] * n))
        out.append(RoseCollapse(R, T, {e: petal.get(e) for e in range(g.num_edges)}))
    return out


# standard small graphs


def theta_graph() -> TopologicalGraph:
    return TopologicalGraph(2, ((0, 1), (0, 1), (0, 1)))


def dumbbell_graph() -> TopologicalGraph:
    """Loop at 0 (edge 1), bar 0-1 (edge 2), loop at 1 (edge 3)."""
    return TopologicalGraph(2, ((0, 0), (0, 1), (1, 1)))


# JSON


def _number(x: Fraction) -> dict:
    return {"exact": str(x), "decimal": float(x)}


def graph_to_json(X: MarkedMetricGraph) -> dict:
    g = X.graph
    names = "abcdefghijklmnopqrstuvwxyz"
    return {
        "vertices": list(range(g.num_vertices)),
        "base": X.spec.base,
        "edges": [
            {"id": i + 1, "from": o, "to": t, "length": str(X.lengths[i])}
            for i, (o, t) in enumerate(g.edges)
        ],
        "marking": {names[k]: list(p) for k, p in enumerate(X.marking)},
    }


def _parse_length(v) -> Fraction:
    if isinstance(v, dict):
        v = v.get("exact", v.get("decimal"))
    if isinstance(v, float):
        return Fraction(v).limit_denominator(10**12)
    return Fraction(v)


def graph_from_json(data) -> MarkedMetricGraph:
    if isinstance(data, str):
        data = json.loads(data)
    try:
        verts = data["vertices"]
        if isinstance(verts, int):
            verts = list(range(verts))
        vindex = {v: i for i, v in enumerate(verts)}
        edges = data["edges"]
        ids = [e["id"] for e in edges]
        if len(set(ids)) != len(ids) or any(int(i) <= 0 for i in ids):
            raise GraphError("edge ids must be distinct positive integers")
        eindex = {int(e["id"]): k + 1 for k, e in enumerate(edges)}
        g = TopologicalGraph(len(verts), tuple((vindex[e["from"]], vindex[e["to"]]) for e in edges))
        lengths = tuple(_parse_length(e.get("length", 1)) for e in edges)
        marking_raw = data.get("marking")
        base = vindex[data.get("base", verts[0])]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, GraphError):
            raise
        raise GraphError("bad graph JSON: %s" % exc) from None
    if marking_raw is None:
        return MarkedMetricGraph.standard(g, lengths, base)
    gens = sorted(marking_raw)
    try:
        marking = tuple(
            tuple((1 if s > 0 else -1) * eindex[abs(int(s))] for s in marking_raw[k]) for k in gens
        )
    except (KeyError, TypeError, ValueError):
        raise GraphError("marking refers to unknown edge ids") from None
    return MarkedMetricGraph(SimplexSpec(g, marking, base), lengths)
