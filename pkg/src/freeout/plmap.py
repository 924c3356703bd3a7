"""PL-maps between marked metric graphs: gates, tension graphs, optimization, folds
and train-track search.

Image paths are tuples of segments ``(i, a, b)``: the path runs along edge ``i``
of the codomain from position ``a`` to position ``b`` (positions measured from
the origin of the edge, ``a != b``).  A point of a graph is ``(v,)`` for a
vertex or ``(i, s)`` for an interior point of edge ``i``.
"""

from __future__ import annotations

import itertools
import time
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .freegroup import Automorphism, apply, unoriented_class, word_key
from ._simplex import feasible_point
from .graphs import TopologicalGraph, edge_index, reduce_path
from .outerspace import (
    GraphError,
    MarkedMetricGraph,
    SimplexSpec,
    candidate_matrices,
    candidates,
    displacement,
    LENGTH_FLOOR,
    min_displacement,
    simple_cycles,
)

Segment = tuple[int, Fraction, Fraction]
Path = tuple[Segment, ...]
TENSION_TOL = 1e-9


class MapError(ValueError):
    """Inconsistent PL-map data or an operation applied outside its domain."""


class NotConverged(RuntimeError):
    pass


# --- paths in a metric graph ------------------------------------------------


def point_at(Y: MarkedMetricGraph, i: int, s) -> tuple:
    if s == 0:
        return (Y.graph.edges[i][0],)
    if s == Y.lengths[i]:
        return (Y.graph.edges[i][1],)
    if not 0 < s < Y.lengths[i]:
        raise MapError("offset %s outside edge %d" % (s, i))
    return (i, Fraction(s))


def tighten(segs: Sequence[Segment]) -> Path:
    """Cancel backtracking; consecutive segments on one edge meeting at the same
    position are combined."""
    out: list[Segment] = []
    for i, a, b in segs:
        if a == b:
            continue
        if out and out[-1][0] == i and out[-1][2] == a:
            _, a0, _ = out.pop()
            if a0 != b:
                out.append((i, a0, b))
        else:
            out.append((i, a, b))
    return tuple(out)


def reverse_path(p: Path) -> Path:
    return tuple((i, b, a) for i, a, b in reversed(p))


def path_length(p: Path) -> Fraction:
    return sum((abs(b - a) for _, a, b in p), Fraction(0))


def edge_segments(Y: MarkedMetricGraph, E: int) -> Segment:
    i = edge_index(E)
    L = Y.lengths[i]
    return (i, Fraction(0), L) if E > 0 else (i, L, Fraction(0))


def edge_path_segments(Y: MarkedMetricGraph, path: Sequence[int]) -> Path:
    return tuple(edge_segments(Y, E) for E in path)


def segments_to_edges(p: Path) -> tuple[int, ...]:
    """Signed edges of a path made of whole edges."""
    return tuple((i + 1) if b > a else -(i + 1) for i, a, b in p)


def path_key(p: Path) -> int | None:
    """Signed edge of the first segment (the germ of the path), or None if empty."""
    if not p:
        return None
    i, a, b = p[0]
    return (i + 1) if b > a else -(i + 1)


def common_prefix_length(p: Path, q: Path) -> Fraction:
    total = Fraction(0)
    for (i, a, b), (j, c, d) in zip(p, q):
        if i != j or a != c or (b > a) != (d > c):
            break
        if b == d:
            total += abs(b - a)
            continue
        total += min(abs(b - a), abs(d - c))
        break
    return total


def split_path(p: Path, c) -> tuple[Path, Path]:
    """Split at codomain length ``c`` from the start."""
    head: list[Segment] = []
    rest = Fraction(c)
    for k, (i, a, b) in enumerate(p):
        ln = abs(b - a)
        if rest >= ln:
            head.append((i, a, b))
            rest -= ln
            if rest == 0:
                return tuple(head), tuple(p[k + 1 :])
            continue
        d = 1 if b > a else -1
        m = a + d * rest
        head.append((i, a, m))
        return tuple(head), ((i, m, b),) + tuple(p[k + 1 :])
    if rest > 0:
        raise MapError("split beyond the end of the path")
    return tuple(head), ()


def _start_point(Y, p: Path):
    i, a, _ = p[0]
    return point_at(Y, i, a)


def _end_point(Y, p: Path):
    i, _, b = p[-1]
    return point_at(Y, i, b)


def _check_continuous(Y, p: Path):
    for s, t in zip(p, p[1:]):
        if point_at(Y, s[0], s[2]) != point_at(Y, t[0], t[1]):
            raise MapError("path is not continuous")


def path_to_point(Y: MarkedMetricGraph, pt) -> Path:
    """Path from the base of Y to ``pt`` through the coordinate tree."""
    spec = Y.spec
    if len(pt) == 1:
        return edge_path_segments(Y, spec.tree_paths[pt[0]])
    i, s = pt
    o = Y.graph.edges[i][0]
    return tighten(edge_path_segments(Y, spec.tree_paths[o]) + ((i, Fraction(0), s),))


# --- PL-maps ------------------------------------------------------------------


@dataclass(frozen=True)
class PLMap:
    """Constant-speed map X -> Y; ``paths[e]`` is the tight image of edge e."""

    domain: MarkedMetricGraph
    codomain: MarkedMetricGraph
    vertex_images: tuple
    paths: tuple[Path, ...]

    def __post_init__(self):
        X, Y = self.domain, self.codomain
        if len(self.vertex_images) != X.graph.num_vertices or len(self.paths) != X.graph.num_edges:
            raise MapError("wrong number of vertex images or edge paths")
        for e, (o, t) in enumerate(X.graph.edges):
            p = self.paths[e]
            if tighten(p) != tuple(p):
                raise MapError("image of edge %d is not tight" % e)
            if p:
                _check_continuous(Y, p)
                if _start_point(Y, p) != self.vertex_images[o] or _end_point(Y, p) != self.vertex_images[t]:
                    raise MapError("image of edge %d has inconsistent endpoints" % e)
            elif self.vertex_images[o] != self.vertex_images[t]:
                raise MapError("collapsed edge %d joins distinct image points" % e)

    def germ_image(self, G: int) -> Path:
        p = self.paths[edge_index(G)]
        return p if G > 0 else reverse_path(p)

    def stretch(self, e: int) -> Fraction:
        return path_length(self.paths[e]) / self.domain.lengths[e]

    @property
    def stretches(self) -> tuple[Fraction, ...]:
        return tuple(self.stretch(e) for e in range(len(self.paths)))

    @property
    def lip(self) -> Fraction:
        return max(self.stretches)

    def tension_graph(self, tol: float = TENSION_TOL) -> frozenset[int]:
        lam = self.stretches
        top = max(lam)
        return frozenset(e for e, x in enumerate(lam) if x >= top * (1 - Fraction(tol)))

    def gate_key(self, G: int):
        return path_key(self.germ_image(G))

    def gates(self, edges=None) -> list[list[list[int]]]:
        """Per vertex, the blocks of germs with equal image direction (degenerate germs alone)."""
        g = self.domain.graph
        allowed = set(range(g.num_edges)) if edges is None else set(edges)
        out = []
        for v in range(g.num_vertices):
            blocks: dict = {}
            for G in g.star[v]:
                if edge_index(G) not in allowed:
                    continue
                k = self.gate_key(G)
                blocks.setdefault(k if k is not None else ("deg", G), []).append(G)
            out.append(list(blocks.values()))
        return out

    def gate_counts(self, edges=None) -> list[int]:
        return [len(b) for b in self.gates(edges)]

    def is_optimal(self, tol: float = TENSION_TOL) -> bool:
        """Every vertex of the tension graph has at least two gates in it."""
        T = self.tension_graph(tol)
        counts = self.gate_counts(T)
        return all(c >= 2 for c in counts if c > 0)

    def illegal_turns(self, edges=None) -> list[tuple[int, int]]:
        turns = []
        for blocks in self.gates(edges):
            for b in blocks:
                turns.extend(itertools.combinations(b, 2))
        return turns

    def is_legal_loop(self, loop: Sequence[int]) -> bool:
        """Cyclic edge path with every turn (including the joint) in distinct gates."""
        n = len(loop)
        for k in range(n):
            a, b = loop[k], loop[(k + 1) % n]
            if self.gate_key(-a) == self.gate_key(b):
                return False
        return True

    def represented_automorphism(self) -> Automorphism:
        """psi with f(marking_X(g)) ~ marking_Y(psi(g)), up to a common conjugation."""
        X, Y = self.domain, self.codomain
        gamma = path_to_point(Y, self.vertex_images[X.spec.base])
        images = []
        for m in X.marking:
            loop: list[Segment] = []
            for G in m:
                loop.extend(self.germ_image(G))
            closed = tighten(gamma + tuple(loop) + reverse_path(gamma))
            word = Y.spec.path_word(segments_to_edges(closed))
            images.append(apply(Y.spec.mu_inverse, word))
        return Automorphism(tuple(images))

    def optimal_constant(self) -> Fraction:
        """Lambda for the homotopy class of f: max candidate ratio L_Y(f gamma)/L_X(gamma)."""
        psi = self.represented_automorphism()
        P, Q = candidate_matrices(self.domain.spec, psi, self.codomain.spec)
        Xl, Yl = self.domain.lengths, self.codomain.lengths
        return max(
            sum((a * b for a, b in zip(p, Yl)), Fraction(0)) / sum((a * b for a, b in zip(q, Xl)), Fraction(0))
            for p, q in zip(P, Q)
        )

    def is_self_map(self) -> bool:
        return self.domain.graph == self.codomain.graph and self.domain.lengths == self.codomain.lengths

    def to_json(self) -> dict:
        """Vertex images as [vertex] or [edge id, offset]; edge images as segment lists."""

        def point(pt):
            return [pt[0]] if len(pt) == 1 else [pt[0] + 1, str(pt[1])]

        return {
            "vertex_images": [point(pt) for pt in self.vertex_images],
            "edges": [
                {"id": e + 1, "path": [[i + 1, str(a), str(b)] for i, a, b in p]}
                for e, p in enumerate(self.paths)
            ],
            "stretches": [str(x) for x in self.stretches],
            "lip": {"exact": str(self.lip), "decimal": float(self.lip)},
        }

    def with_domain_lengths(self, lengths) -> "PLMap":
        X = self.domain.with_lengths(lengths)
        Y = X if self.is_self_map() else self.codomain
        return PLMap(X, Y, self.vertex_images, self.paths)


def combinatorial_map(X: MarkedMetricGraph, phi: Automorphism) -> PLMap:
    """Self-map of X representing phi: vertices to the base, tree edges collapsed,
    each other edge sent to the tight loop of theta(x_e), theta = mu phi mu^-1."""
    spec = X.spec
    theta_images = [apply(spec.mu, apply(phi, apply(spec.mu_inverse, (k,)))) for k in range(1, X.rank + 1)]
    letter_path = {}
    for e, k in spec.letters.items():
        E = e + 1
        o, t = X.graph.edges[e]
        letter_path[k] = spec.tree_paths[o] + (E,) + tuple(-F for F in reversed(spec.tree_paths[t]))
    paths = []
    for e in range(X.graph.num_edges):
        if e in spec.tree:
            paths.append(())
            continue
        word = theta_images[spec.letters[e] - 1]
        raw: list[int] = []
        for x in word:
            p = letter_path[abs(x)]
            raw.extend(p if x > 0 else tuple(-F for F in reversed(p)))
        paths.append(edge_path_segments(X, reduce_path(raw)))
    base = (spec.base,)
    return PLMap(X, X, tuple([base] * X.graph.num_vertices), tuple(paths))


def move_vertices(f: PLMap, moves: dict) -> PLMap:
    """Homotope f by moving ``f(v)`` along the path ``moves[v]`` (which starts at f(v))."""
    g = f.domain.graph
    vimg = list(f.vertex_images)
    for v, p in moves.items():
        if p:
            if _start_point(f.codomain, p) != vimg[v]:
                raise MapError("move for vertex %d does not start at its image" % v)
            vimg[v] = _end_point(f.codomain, p)
    paths = []
    for e, (o, t) in enumerate(g.edges):
        head = reverse_path(moves.get(o, ()))
        tail = moves.get(t, ())
        paths.append(tighten(head + f.paths[e] + tail))
    return PLMap(f.domain, f.codomain, tuple(vimg), tuple(paths))


def pl_from_vertex_images(X: MarkedMetricGraph, phi: Automorphism, vertex_images, moves=None) -> PLMap:
    """PL self-map representing phi with prescribed vertex images.

    Starts from the combinatorial map and moves each vertex image from the base
    along ``moves[v]`` (default: the coordinate-tree path to the target point).
    """
    f = combinatorial_map(X, phi)
    if moves is None:
        moves = {v: path_to_point(X, pt) for v, pt in enumerate(vertex_images)}
    h = move_vertices(f, moves)
    if tuple(h.vertex_images) != tuple(vertex_images):
        raise MapError("moves do not end at the requested vertex images")
    return h


# --- the optimization flow ------------------------------------------------------


@dataclass
class FlowResult:
    map: PLMap
    target: Fraction
    initial_lip: Fraction
    d_infinity: Fraction
    steps: int
    status: str
    moved: dict = field(default_factory=dict)


def _clusters(f: PLMap) -> dict[int, int]:
    """Representative of each vertex, identifying endpoints of edges with empty image."""
    g = f.domain.graph
    rep = list(range(g.num_vertices))

    def find(v):
        while rep[v] != v:
            rep[v] = rep[rep[v]]
            v = rep[v]
        return v

    for e, (o, t) in enumerate(g.edges):
        if not f.paths[e]:
            a, b = find(o), find(t)
            if a != b:
                rep[max(a, b)] = min(a, b)
    return {v: find(v) for v in range(g.num_vertices)}


def _classify(f: PLMap, T: frozenset[int]):
    """Peel one-gated vertices: levels V_i, edge levels E_i, preferred gates, residual edges.

    Vertices whose images are glued by edges with empty image are treated as a
    single vertex; levels and gates are reported for every member.
    """
    g = f.domain.graph
    rep = _clusters(f)
    residual = set(T)
    level: dict[int, int] = {}
    pref: dict[int, int] = {}
    edge_level: dict[int, int] = {}
    i = 0
    while True:
        keys = defaultdict(set)
        for e in residual:
            o, t = g.edges[e]
            keys[rep[o]].add(f.gate_key(e + 1))
            keys[rep[t]].add(f.gate_key(-(e + 1)))
        Vi = sorted(v for v, ks in keys.items() if v not in level and len(ks) == 1)
        if not Vi:
            break
        for v in Vi:
            level[v] = i
            (pref[v],) = keys[v]
        Ei = {e for e in residual if rep[g.edges[e][0]] in Vi or rep[g.edges[e][1]] in Vi}
        for e in Ei:
            edge_level[e] = i
        residual -= Ei
        i += 1
    level = {v: level[r] for v, r in rep.items() if r in level}
    pref = {v: pref[r] for v, r in rep.items() if r in pref}
    return level, pref, edge_level, residual


def _speeds(f: PLMap, T, level, pref, edge_level) -> dict[int, Fraction]:
    g = f.domain.graph
    X = f.domain
    rep = _clusters(f)
    members = defaultdict(list)
    for v, r in rep.items():
        members[r].append(v)
    tverts = {rep[v] for e in T for v in g.edges[e]}
    order = sorted(tverts, key=lambda v: (level.get(v, float("inf")), v))
    rank = {v: k for k, v in enumerate(order)}
    s: dict[int, Fraction] = {}
    for v in reversed(order):
        if v not in level:
            s[v] = Fraction(0)
            continue
        best = Fraction(0)
        for G in (G for m in members[v] for G in g.star[m]):
            e = edge_index(G)
            if edge_level.get(e) != level[v]:
                continue
            u = rep[g.terminus(G)]
            L = X.lengths[e]
            if u == v:
                best = max(best, L / 2)
            elif rank[u] > rank[v]:
                sigma = -1 if (u in pref and f.gate_key(-G) == pref[u]) else 1
                best = max(best, L + sigma * s[u])
        s[v] = best
    return {v: s[r] for v, r in rep.items() if s.get(r, 0) > 0}


def _gate_segment(f: PLMap, v: int, gate):
    g = f.domain.graph
    rep = _clusters(f)
    germs = (f.germ_image(G) for u in range(g.num_vertices) if rep[u] == rep[v] for G in g.star[u])
    return next(p for p in germs if p and path_key(p) == gate)[0]


def _length_rates(f: PLMap, speed, pref) -> list[Fraction]:
    g = f.domain.graph
    rates = []
    for e, (o, t) in enumerate(g.edges):
        if not f.paths[e]:
            so, st = speed.get(o, 0), speed.get(t, 0)
            if so and st and pref[o] == pref[t]:
                rates.append(abs(Fraction(so - st)))
            else:
                rates.append(Fraction(so + st))
            continue
        r = Fraction(0)
        for G, w in ((e + 1, o), (-(e + 1), t)):
            sw = speed.get(w)
            if sw:
                r += -sw if f.gate_key(G) == pref[w] else sw
        rates.append(r)
    return rates


def _nudge_step(f: PLMap, T):
    """Move one-gated tension vertices into their gate, shrinking the tension edges there.

    Returns (new map, moves, step) or None if nothing moves.  The step stops
    at the first image point reaching a vertex or image path vanishing, and
    halfway to the first non-tension edge catching up, so edges only leave
    the tension graph.
    """
    X = f.domain
    g = X.graph
    level, pref, edge_level, residual = _classify(f, T)
    speed = _speeds(f, T, level, pref, edge_level)
    if not speed:
        return None
    lens = [path_length(p) for p in f.paths]
    rates = _length_rates(f, speed, pref)
    lam = [lens[e] / X.lengths[e] for e in range(g.num_edges)]
    lrate = [rates[e] / X.lengths[e] for e in range(g.num_edges)]
    top = max(lam)
    rmax = max(lrate[e] for e in T)
    Ylen = f.codomain.lengths
    events = []
    for v, sv in speed.items():
        i, a, b = _gate_segment(f, v, pref[v])
        events.append((Ylen[i] - a if b > a else a) / sv)
    for e in range(g.num_edges):
        if rates[e] < 0 and lens[e] > 0:
            events.append(lens[e] / -rates[e])
        if e not in T and lrate[e] > rmax:
            events.append((top - lam[e]) / (lrate[e] - rmax) / 2)
    h = min(events)
    if h <= 0:
        return None
    moves = {}
    for v, sv in speed.items():
        i, a, b = _gate_segment(f, v, pref[v])
        d = 1 if b > a else -1
        moves[v] = ((i, a, a + d * sv * h),)
    return move_vertices(f, moves), moves, h


def _move_segment(Y: MarkedMetricGraph, pt, key: int, d) -> Segment:
    """Segment of length d leaving the point pt in the direction of signed edge ``key``."""
    i = edge_index(key)
    if len(pt) == 2:
        a = pt[1]
    else:
        a = Fraction(0) if key > 0 else Y.lengths[i]
    return (i, a, a + d if key > 0 else a - d)


def _room(Y: MarkedMetricGraph, pt, key: int) -> Fraction:
    i = edge_index(key)
    if len(pt) == 1:
        return Y.lengths[i]
    return Y.lengths[i] - pt[1] if key > 0 else pt[1]


def _edge_rates(f: PLMap, dirs: dict, speed: dict) -> list[Fraction]:
    """d/dt of each image-path length when vertex v moves along dirs[v] at speed[v]."""
    g = f.domain.graph
    rates = []
    for e, (o, t) in enumerate(g.edges):
        so, st = speed.get(o, 0), speed.get(t, 0)
        if not f.paths[e]:
            if o == t:
                rates.append(Fraction(0))
            elif so and st and dirs[o] == dirs[t]:
                rates.append(abs(Fraction(so - st)))
            else:
                rates.append(Fraction(so + st))
            continue
        r = Fraction(0)
        for G, w, sw in ((e + 1, o, so), (-(e + 1), t, st)):
            if sw:
                r += -sw if path_key(f.germ_image(G)) == dirs[w] else sw
        rates.append(r)
    return rates


def _descent(f: PLMap, eps):
    """Descent direction for Lip at f.

    Every edge stretched within ``eps`` of Lip must shrink at rate at least 1
    (in stretch units).  Each vertex of such an edge picks one of the
    directions its active germ images leave in, and for each choice an exact
    LP finds the speeds with the least maximum.  Returns (dirs, speeds) or
    None when no choice works.
    """
    g = f.domain.graph
    X = f.domain
    top = f.lip
    active = [e for e in range(g.num_edges) if f.stretch(e) >= top - eps]
    options: dict[int, set] = defaultdict(set)
    for e in active:
        o, t = g.edges[e]
        options[o].add(path_key(f.paths[e]))
        options[t].add(path_key(reverse_path(f.paths[e])))
    movers = sorted(options)
    col = {v: k for k, v in enumerate(movers)}
    n = len(movers) + 1
    best = None
    for choice in itertools.product(*(sorted(options[v]) for v in movers)):
        dirs = dict(zip(movers, choice))
        A, b = [], []
        for e in active:
            row = [Fraction(0)] * n
            o, t = g.edges[e]
            for G, w in ((e + 1, o), (-(e + 1), t)):
                c = -1 if path_key(f.germ_image(G)) == dirs[w] else 1
                row[col[w]] += Fraction(c) / X.lengths[e]
            A.append(row)
            b.append(Fraction(-1))
        for v in movers:
            row = [Fraction(0)] * n
            row[col[v]], row[-1] = Fraction(1), Fraction(-1)
            A.append(row)
            b.append(Fraction(0))
        x = feasible_point(A, b, [], [], n, maximize=[Fraction(0)] * (n - 1) + [Fraction(-1)])
        if x is not None and (best is None or x[-1] < best[0]):
            best = (x[-1], dirs, {v: x[col[v]] for v in movers if x[col[v]] > 0})
    if best is None:
        return None
    return best[1], best[2]


def _descent_step(f: PLMap, target, max_halvings: int = 40):
    """Advance along a descent direction until the first event.

    The active set is widened to edges within eps of Lip (eps halved from
    (Lip - target)/2 until a direction exists, finally eps = 0); demanding
    that near-maximal edges shrink too prevents zigzagging between edges
    that take turns being maximal.
    """
    top = f.lip
    eps = (top - target) / 2
    out = None
    for _ in range(max_halvings):
        out = _descent(f, eps)
        if out is not None:
            break
        eps /= 2
    if out is None:
        out = _descent(f, 0)
    if out is None:
        return None
    dirs, speed = out
    X, Y = f.domain, f.codomain
    g = X.graph
    lens = [path_length(p) for p in f.paths]
    rates = _edge_rates(f, dirs, speed)
    lam = [lens[e] / X.lengths[e] for e in range(g.num_edges)]
    lrate = [rates[e] / X.lengths[e] for e in range(g.num_edges)]
    # Lip drops at rate >= 1 while no other edge overtakes the line top - t
    bounds = [top - target]
    for v, sv in speed.items():
        bounds.append(_room(Y, f.vertex_images[v], dirs[v]) / sv)
    for e in range(g.num_edges):
        if rates[e] < 0 and lens[e] > 0:
            bounds.append(lens[e] / -rates[e])
        if lrate[e] > -1:
            bounds.append((top - lam[e]) / (lrate[e] + 1))
    h = min(bounds)
    if h <= 0:
        return None
    moves = {v: (_move_segment(Y, f.vertex_images[v], dirs[v], sv * h),) for v, sv in speed.items()}
    return move_vertices(f, moves), moves, h


FLOW_TOL = Fraction(1, 10**12)


def weak_optimize(
    f: PLMap,
    target: Fraction | None = None,
    max_steps: int = 10000,
    tol: float = TENSION_TOL,
    stop_tol: Fraction = FLOW_TOL,
) -> FlowResult:
    """Run the optimization flow until Lip reaches Lambda.

    Vertex images move so that every maximally stretched edge shrinks at rate
    at least 1, using the least maximal speed (an exact LP over the gate
    choices at each vertex).  Steps run from event to event (a new edge
    reaching maximal stretch, an image point reaching a vertex, an image path
    shrinking to a point, or the target), so the flow is exact.
    ``d_infinity`` is the largest distance travelled by a vertex image along
    its tightened track, which bounds (and on trees equals) the sup-distance
    between the maps.  The flow stops once Lip is within ``stop_tol`` of the
    target.
    """
    if target is None:
        target = f.optimal_constant()
    start = f.lip
    moved: dict[int, Path] = {}
    steps = 0
    status = "weakly-optimal"
    while f.lip > target + stop_tol:
        out = _descent_step(f, target)
        if out is None:
            status = "stalled" if f.lip > target * (1 + Fraction(tol)) else "weakly-optimal"
            break
        f, moves, _ = out
        for v, p in moves.items():
            moved[v] = tighten(moved.get(v, ()) + p)
        steps += 1
        if steps >= max_steps:
            raise NotConverged("optimization flow did not reach Lambda in %d steps" % max_steps)
    d_inf = max((path_length(p) for p in moved.values()), default=Fraction(0))
    return FlowResult(f, target, start, d_inf, steps, status, moved)


def optimize(f: PLMap, target: Fraction | None = None, max_steps: int = 10000, tol: float = TENSION_TOL) -> PLMap:
    """Weakly optimize, then nudge one-gated tension vertices until all are two-gated."""
    f = weak_optimize(f, target, max_steps, tol).map
    for _ in range(max_steps):
        if f.is_optimal(tol):
            return f
        T = f.tension_graph(tol)
        out = _nudge_step(f, T)
        if out is None:
            return f
        f = out[0]
    raise NotConverged("could not reach an optimal map")


def d_infinity_bound_holds(res: FlowResult, slack=1e-6) -> bool:
    vol = res.map.domain.volume
    return res.d_infinity <= vol * (res.initial_lip - res.target) + Fraction(slack)


# --- folds ----------------------------------------------------------------------


class _Mutable:
    """Editable copy of (X, f) used by folds and collapses."""

    def __init__(self, f: PLMap):
        X = f.domain
        self.Y = f.codomain
        self.self_map = f.is_self_map()
        self.edges = [list(e) for e in X.graph.edges]
        self.lengths = list(X.lengths)
        self.paths = list(f.paths)
        self.vimg = list(f.vertex_images)
        self.marking = [list(p) for p in X.marking]
        self.base = X.spec.base
        self.nv = X.graph.num_vertices

    def star(self, v):
        out = []
        for i, (o, t) in enumerate(self.edges):
            if o == v:
                out.append(i + 1)
            if t == v:
                out.append(-(i + 1))
        return out

    def germ_path(self, G):
        p = self.paths[edge_index(G)]
        return p if G > 0 else reverse_path(p)

    def _substitute(self, fn):
        self.marking = [list(reduce_path(x for G in m for x in fn(G))) for m in self.marking]

    def subdivide(self, G: int, d: Fraction) -> int:
        """Split the edge of G at distance d from origin(G); return the signed piece leaving it."""
        i = edge_index(G)
        L = self.lengths[i]
        pos = d if G > 0 else L - d
        o, t = self.edges[i]
        w = self.nv
        self.nv += 1
        p = self.paths[i]
        lam = path_length(p) / L
        head, tail = split_path(p, lam * pos)
        j = len(self.edges)
        self.edges[i] = [o, w]
        self.edges.append([w, t])
        self.lengths[i] = pos
        self.lengths.append(L - pos)
        self.paths[i] = head
        self.paths.append(tail)
        self.vimg.append(_end_point(self.Y, head) if head else self.vimg[o])
        I, J = i + 1, j + 1
        self._substitute(lambda E: (I, J) if E == I else ((-J, -I) if E == -I else (E,)))
        return I if G > 0 else -J

    def remove_edge(self, i: int, replacement=None):
        """Drop edge i (0-based), rewriting marking paths via ``replacement(E)``."""
        I = i + 1
        if replacement is not None:
            self._substitute(lambda E: replacement(E) if abs(E) == I else (E,))
        elif any(abs(E) == I for m in self.marking for E in m):
            raise MapError("marking crosses a removed edge")
        del self.edges[i]
        del self.lengths[i]
        del self.paths[i]

        def shift(E):
            return E if abs(E) < I else (E - 1 if E > 0 else E + 1)

        self.marking = [[shift(E) for E in m] for m in self.marking]

    def merge_vertex(self, a: int, b: int):
        """Identify vertex a into b (their images must agree) and renumber."""
        for e in self.edges:
            for k in (0, 1):
                if e[k] == a:
                    e[k] = b
        if self.base == a:
            self.base = b
        self.drop_vertex(a)

    def drop_vertex(self, a: int):
        for e in self.edges:
            for k in (0, 1):
                if e[k] > a:
                    e[k] -= 1
        if self.base > a:
            self.base -= 1
        del self.vimg[a]
        self.nv -= 1

    def rebase(self, v: int):
        """Move the base to a neighbour when v is the base, conjugating the marking."""
        if self.base != v:
            return
        for G in self.star(v):
            i = edge_index(G)
            o, t = self.edges[i]
            other = t if G > 0 else o
            if other != v:
                q = [-G]  # path from other to v
                self.marking = [list(reduce_path(q + m + [G])) for m in self.marking]
                self.base = other
                return

    def unsubdivide(self):
        """Erase valence-2 vertices, joining their two edges into one."""
        while True:
            for v in range(self.nv):
                st = self.star(v)
                if len(st) == 2 and edge_index(st[0]) != edge_index(st[1]):
                    break
            else:
                return
            self.rebase(v)
            g1, g2 = self.star(v)
            i1, i2 = edge_index(g1), edge_index(g2)
            a = self.edges[i1][1] if g1 > 0 else self.edges[i1][0]
            b = self.edges[i2][1] if g2 > 0 else self.edges[i2][0]
            path = tighten(reverse_path(self.germ_path(g1)) + self.germ_path(g2))
            self.edges.append([a, b])
            self.lengths.append(self.lengths[i1] + self.lengths[i2])
            self.paths.append(path)
            K = len(self.edges)
            self.marking = [_replace_pair(m, -g1, g2, K) for m in self.marking]
            for i in sorted((i1, i2), reverse=True):
                self.remove_edge(i)
            self.drop_vertex(v)

    def freeze(self) -> PLMap:
        g = TopologicalGraph(self.nv, tuple(tuple(e) for e in self.edges))
        spec = SimplexSpec(g, tuple(tuple(m) for m in self.marking), self.base)
        X = MarkedMetricGraph(spec, tuple(self.lengths))
        return PLMap(X, self.Y, tuple(self.vimg), tuple(tighten(p) for p in self.paths))


def _replace_pair(m, a, b, K):
    """Replace consecutive (a, b) by K and (-b, -a) by -K in an edge path."""
    out = []
    k = 0
    while k < len(m):
        if k + 1 < len(m) and m[k] == a and m[k + 1] == b:
            out.append(K)
            k += 2
        elif k + 1 < len(m) and m[k] == -b and m[k + 1] == -a:
            out.append(-K)
            k += 2
        else:
            out.append(m[k])
            k += 1
    return out


def simple_fold(f: PLMap, turn: tuple[int, int], max_fold=None) -> PLMap:
    """Fold initial segments of the two germs of an illegal turn.

    The common image prefix has length c; the germs are identified up to image
    length c/2 (or ``max_fold``).  Returns the induced map X' -> Y.
    """
    G1, G2 = turn
    g = f.domain.graph
    v = g.origin(G1)
    if g.origin(G2) != v or G1 == G2:
        raise MapError("turn must be two distinct germs at one vertex")
    if f.gate_key(G1) is None or f.gate_key(G1) != f.gate_key(G2):
        raise MapError("turn (%d, %d) is legal" % turn)
    p1, p2 = f.germ_image(G1), f.germ_image(G2)
    a = common_prefix_length(p1, p2) / 2
    if max_fold is not None:
        a = min(a, Fraction(max_fold))
    lam1, lam2 = f.stretch(edge_index(G1)), f.stretch(edge_index(G2))
    M = _Mutable(f)
    same_edge = edge_index(G1) == edge_index(G2)
    H1 = M.subdivide(G1, a / lam1)
    if same_edge and G1 > 0:
        G2 = -len(M.edges)  # the far piece of the loop, entered backwards from v
    H2 = M.subdivide(G2, a / lam2)
    i1, i2 = edge_index(H1), edge_index(H2)
    w1 = M.edges[i1][1] if H1 > 0 else M.edges[i1][0]
    w2 = M.edges[i2][1] if H2 > 0 else M.edges[i2][0]
    M.lengths[i1] = a / max(lam1, lam2)
    M.remove_edge(i2, lambda E: (H1,) if E == H2 else (-H1,))
    M.merge_vertex(w2, w1)
    M.unsubdivide()
    return M.freeze()


def collapse_forest(X: MarkedMetricGraph, forest) -> MarkedMetricGraph:
    """Contract a forest of edges, transporting the marking."""
    forest = set(forest)
    g = X.graph
    parent = list(range(g.num_vertices))

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    for e in forest:
        a, b = find(g.edges[e][0]), find(g.edges[e][1])
        if a == b:
            raise GraphError("edge set contains a cycle")
        parent[a] = b
    roots = sorted({find(v) for v in range(g.num_vertices)})
    vid = {r: k for k, r in enumerate(roots)}
    keep = [e for e in range(g.num_edges) if e not in forest]
    eid = {e: k + 1 for k, e in enumerate(keep)}
    edges = tuple((vid[find(g.edges[e][0])], vid[find(g.edges[e][1])]) for e in keep)
    marking = tuple(
        reduce_path((1 if E > 0 else -1) * eid[edge_index(E)] for E in m if edge_index(E) in eid)
        for m in X.marking
    )
    spec = SimplexSpec(TopologicalGraph(len(roots), edges), marking, vid[find(X.spec.base)])
    return MarkedMetricGraph(spec, tuple(X.lengths[e] for e in keep))


# --- train tracks ----------------------------------------------------------------


def invariant_subgraph(f: PLMap, edges) -> frozenset[int]:
    """Largest subgraph of ``edges`` whose edges map into it."""
    Y = set(edges)
    while True:
        keep = {e for e in Y if all(s[0] in Y for s in f.paths[e])}
        if keep == Y:
            return frozenset(Y)
        Y = keep


def _components(g: TopologicalGraph, edges) -> list[frozenset[int]]:
    edges = set(edges)
    comps = []
    while edges:
        e = edges.pop()
        comp, stack = {e}, [e]
        while stack:
            x = stack.pop()
            ends = set(g.edges[x])
            for y in list(edges):
                if ends & set(g.edges[y]):
                    edges.discard(y)
                    comp.add(y)
                    stack.append(y)
        comps.append(frozenset(comp))
    return comps


def _has_cycle(g: TopologicalGraph, edges) -> bool:
    verts = {v for e in edges for v in g.edges[e]}
    return len(edges) - len(verts) + len(_components(g, edges)) > 0


def _path_is_legal(f: PLMap, p: Path) -> bool:
    for (i, a, b), (j, c, d) in zip(p, p[1:]):
        arrive = -(i + 1) if b > a else (i + 1)
        leave = (j + 1) if d > c else -(j + 1)
        if f.gate_key(arrive) == f.gate_key(leave):
            return False
    return True


def train_track_witness(f: PLMap, tol: float = TENSION_TOL) -> frozenset[int] | None:
    """An f-invariant subgraph of the tension graph on which f is a train track map."""
    if not f.is_self_map():
        raise MapError("train track structure needs a self-map")
    g = f.domain.graph
    inv = invariant_subgraph(f, f.tension_graph(tol))
    comps = _components(g, inv)
    for r in range(len(comps), 0, -1):
        for chosen in itertools.combinations(comps, r):
            Yset = frozenset().union(*chosen)
            if not _has_cycle(g, Yset) or invariant_subgraph(f, Yset) != Yset:
                continue
            if all(_path_is_legal(f, f.paths[e]) for e in Yset) and _turns_map_legally(f, Yset):
                return Yset
    return None


def _turns_map_legally(f: PLMap, Yset) -> bool:
    g = f.domain.graph
    for v in range(g.num_vertices):
        germs = [G for G in g.star[v] if edge_index(G) in Yset]
        img = f.vertex_images[v]
        for G1, G2 in itertools.combinations(germs, 2):
            k1, k2 = f.gate_key(G1), f.gate_key(G2)
            if k1 == k2:
                continue
            if len(img) == 2:
                continue  # two directions at an interior point
            if f.gate_key(k1) == f.gate_key(k2):
                return False
    return True


def is_train_track(f: PLMap, tol: float = TENSION_TOL) -> bool:
    return train_track_witness(f, tol) is not None


def legal_candidates(f: PLMap, edges=None, tol: float = TENSION_TOL) -> list:
    """Candidate loops inside ``edges`` (default: the tension graph) that are f-legal."""
    edges = f.tension_graph(tol) if edges is None else set(edges)
    out = []
    for c in candidates(f.domain.spec):
        if all(edge_index(E) in edges for E in c.loop) and f.is_legal_loop(c.loop):
            out.append(c)
    return out


@dataclass
class TrainTrackResult:
    status: str  # train-track | thin | inconclusive
    point: MarkedMetricGraph
    map: PLMap | None
    lam: Fraction
    witness: list | None = None
    trace: list = field(default_factory=list)
    folds: int = 0


def _graph_id(g: TopologicalGraph) -> str:
    return "V%dE%d:%s" % (g.num_vertices, g.num_edges, ",".join("%d-%d" % e for e in g.edges))


def _optimal_self_map(X: MarkedMetricGraph, phi: Automorphism) -> PLMap:
    f = combinatorial_map(X, phi)
    return optimize(f, displacement(X, phi))


def find_train_track(
    phi: Automorphism,
    start: MarkedMetricGraph | None = None,
    max_folds: int = 50,
    time_cap: float = 30.0,
) -> TrainTrackResult:
    """Descend the displacement: minimize over the current simplex, test for a train
    track, otherwise fold an illegal turn of the tension graph and repeat.

    A minimizer on a face either collapses a forest (a smaller simplex) or
    shrinks a subgraph with a cycle, which is returned as an invariant-subgraph
    witness (status ``thin``).  A face is not collapsed when it offers no
    decrease over the point we folded from, so folds cannot be undone.
    """
    t0 = time.perf_counter()
    X = MarkedMetricGraph.uniform_rose(phi.rank) if start is None else start
    if X.rank != phi.rank:
        raise ValueError("start graph has rank %d, automorphism has rank %d" % (X.rank, phi.rank))
    trace: list = []
    folds = 0
    came_from: Fraction | None = None
    while True:
        if time.perf_counter() - t0 > time_cap:
            return TrainTrackResult("inconclusive", X, None, displacement(X, phi), trace=trace, folds=folds)
        r = min_displacement(X.spec, phi)
        progress = came_from is None or r.value < came_from * (1 - Fraction(1, 10**9))
        if r.boundary and progress:
            short = [e for e, x in enumerate(r.lengths) if x <= 10 * LENGTH_FLOOR]
            g = X.graph
            trace.append((len(trace), _graph_id(g), float(r.value), 0))
            if _has_cycle(g, short):
                loops = [c for c in simple_cycles(g) if all(edge_index(E) in short for E in c)]
                witness = sorted({unoriented_class(X.spec.loop_word(c)) for c in loops}, key=word_key)
                return TrainTrackResult("thin", X.with_lengths(r.lengths), None, r.value, witness, trace, folds)
            X = collapse_forest(X.with_lengths(r.lengths), short).normalized()
            came_from = None
            continue
        if progress:
            X = X.with_lengths(r.lengths)
        lam = displacement(X, phi)
        f = _optimal_self_map(X, phi)
        T = f.tension_graph()
        trace.append((len(trace), _graph_id(X.graph), float(lam), len(T)))
        if is_train_track(f):
            return TrainTrackResult("train-track", X, f, lam, trace=trace, folds=folds)
        turns = f.illegal_turns(T)
        if folds >= max_folds or not turns:
            return TrainTrackResult("inconclusive", X, f, lam, trace=trace, folds=folds)
        X = simple_fold(f, turns[0]).domain.normalized()
        folds += 1
        came_from = lam
