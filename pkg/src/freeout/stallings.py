"""Stallings graphs: folding, cores, conjugacy of subgroups, visible reducibility."""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

from .freegroup import Automorphism, Word, apply, inverse, multiply


class TrivialSubgroup(ValueError):
    """The subgroup is trivial, so its core graph is empty."""


class _Folder:
    """Mutable labelled graph folded in place.

    ``adj[v][s]`` holds the pairs ``(e, d)`` of edges leaving ``v`` with signed
    label ``s``: ``d = +1`` when ``e`` starts at ``v`` (label ``+lab[e]``) and
    ``d = -1`` when it ends there (traversed backwards, label ``-lab[e]``).
    With ``track`` every edge also carries a word ``y[e]`` in a second free
    group; closed paths at the base read ``phi(y-word) = label word``.
    """

    def __init__(self, track: bool = False):
        self.track = track
        self.src: dict[int, int] = {}
        self.dst: dict[int, int] = {}
        self.lab: dict[int, int] = {}
        self.y: dict[int, Word] = {}
        self.adj: dict[int, dict[int, set]] = defaultdict(lambda: defaultdict(set))
        self.nv = 1
        self.ne = 0
        self.base = 0
        self.adj[0]

    def new_vertex(self) -> int:
        v = self.nv
        self.nv += 1
        self.adj[v]
        return v

    def add_edge(self, u: int, letter: int, v: int, y: Word = ()) -> None:
        """Add an edge read as ``letter`` from ``u`` to ``v``."""
        if letter < 0:
            u, v, letter, y = v, u, -letter, inverse(y)
        e = self.ne
        self.ne += 1
        self.src[e], self.dst[e], self.lab[e], self.y[e] = u, v, letter, y
        self.adj[u][letter].add((e, 1))
        self.adj[v][-letter].add((e, -1))

    def add_petal(self, word: Word, y: Word = ()) -> None:
        cur = self.base
        for j, x in enumerate(word):
            nxt = self.base if j == len(word) - 1 else self.new_vertex()
            self.add_edge(cur, x, nxt, y if j == 0 else ())
            cur = nxt

    def _remove_edge(self, e: int) -> None:
        self.adj[self.src[e]][self.lab[e]].discard((e, 1))
        self.adj[self.dst[e]][-self.lab[e]].discard((e, -1))
        for d in (self.src, self.dst, self.lab, self.y):
            del d[e]

    def _other(self, e: int, d: int) -> int:
        return self.dst[e] if d == 1 else self.src[e]

    def _yt(self, e: int, d: int) -> Word:
        return self.y[e] if d == 1 else inverse(self.y[e])

    def _shift(self, s: int, h: Word) -> None:
        for entries in self.adj[s].values():
            for e, d in entries:
                if d == 1:
                    self.y[e] = multiply(inverse(h), self.y[e])
                else:
                    self.y[e] = multiply(self.y[e], h)

    def _merge(self, a: int, b: int) -> None:
        """Identify vertex ``a`` into ``b``."""
        for s, entries in list(self.adj[a].items()):
            for e, d in entries:
                if d == 1:
                    self.src[e] = b
                else:
                    self.dst[e] = b
                self.adj[b][s].add((e, d))
        del self.adj[a]
        if self.base == a:
            self.base = b

    def fold(self) -> bool:
        """Fold completely; returns False if a fold lost rank in tracked mode."""
        work = list(self.adj)
        while work:
            v = work.pop()
            if v not in self.adj:
                continue
            pair = None
            for s, entries in self.adj[v].items():
                if len(entries) > 1:
                    pair = sorted(entries)[:2]
                    break
            if pair is None:
                continue
            (e1, d1), (e2, d2) = pair
            w1, w2 = self._other(e1, d1), self._other(e2, d2)
            if self.track:
                y1, y2 = self._yt(e1, d1), self._yt(e2, d2)
                if y1 != y2:
                    if w1 == w2:
                        return False
                    if w2 not in (v, self.base):
                        self._shift(w2, multiply(inverse(y2), y1))
                    elif w1 not in (v, self.base):
                        self._shift(w1, multiply(inverse(y1), y2))
                    else:
                        loop, other = (e1, d1), (e2, d2)
                        if w1 != v:
                            loop, other = other, loop
                        self._shift(v, multiply(inverse(self._yt(*loop)), self._yt(*other)))
                    w1, w2 = self._other(e1, d1), self._other(e2, d2)
            self._remove_edge(e2)
            if w1 != w2:
                if w2 == self.base:
                    w1, w2 = w2, w1
                self._merge(w2, w1)
            work.extend((v, w1))
        return True

    def freeze(self) -> "StallingsGraph":
        order = sorted(self.adj, key=lambda v: (v != self.base, v))
        index = {v: i for i, v in enumerate(order)}
        edges = tuple(
            sorted((index[self.src[e]], self.lab[e], index[self.dst[e]]) for e in self.src)
        )
        return StallingsGraph(len(order), edges, 0)


@dataclass(frozen=True)
class StallingsGraph:
    """Folded graph with edges ``(src, label, dst)``; ``base`` is None for cores."""

    num_vertices: int
    edges: tuple[tuple[int, int, int], ...]
    base: int | None = 0

    def germs(self) -> list[dict[int, int]]:
        table: list[dict[int, int]] = [dict() for _ in range(self.num_vertices)]
        for u, lab, v in self.edges:
            table[u][lab] = v
            table[v][-lab] = u
        return table

    def accepts(self, w: Word) -> bool:
        """Does the reduced loop ``w`` at the base read in the graph?"""
        table = self.germs()
        v = self.base
        for x in w:
            if x not in table[v]:
                return False
            v = table[v][x]
        return v == self.base

    def is_folded(self) -> bool:
        seen = set()
        for u, lab, v in self.edges:
            for key in ((u, lab), (v, -lab)):
                if key in seen:
                    return False
                seen.add(key)
        return True


def build_and_fold(gens: Sequence[Word]) -> StallingsGraph:
    f = _Folder()
    for w in gens:
        if w:
            f.add_petal(w)
    f.fold()
    return f.freeze()


def fold_with_preimages(images: Sequence[Word]) -> tuple[Word, ...] | None:
    """Inverse images of the basis if ``images`` is a basis of F_n, else None."""
    n = len(images)
    if n == 0 or any(not w for w in images):
        return None
    f = _Folder(track=True)
    for i, w in enumerate(images):
        f.add_petal(w, (i + 1,))
    if not f.fold():
        return None
    if len(f.adj) != 1 or sorted(f.lab.values()) != list(range(1, n + 1)):
        return None
    pre = [()] * n
    for e, lab in f.lab.items():
        pre[lab - 1] = f.y[e]
    return tuple(pre)


def core(g: StallingsGraph) -> StallingsGraph:
    """Prune hanging trees; raises TrivialSubgroup when nothing is left."""
    edges = list(g.edges)
    while True:
        degree = defaultdict(int)
        for u, _, v in edges:
            degree[u] += 1
            degree[v] += 1
        keep = [e for e in edges if degree[e[0]] > 1 and degree[e[2]] > 1]
        if len(keep) == len(edges):
            break
        edges = keep
    if not edges:
        raise TrivialSubgroup("core graph is empty")
    verts = sorted({u for u, _, _ in edges} | {v for _, _, v in edges})
    index = {v: i for i, v in enumerate(verts)}
    return StallingsGraph(
        len(verts), tuple(sorted((index[u], l, index[v]) for u, l, v in edges)), None
    )


def isomorphic(a: StallingsGraph, b: StallingsGraph) -> bool:
    """Label-preserving isomorphism of folded graphs (basepoints ignored)."""
    if a.num_vertices != b.num_vertices or len(a.edges) != len(b.edges):
        return False
    if sorted(l for _, l, _ in a.edges) != sorted(l for _, l, _ in b.edges):
        return False
    ta, tb = a.germs(), b.germs()
    for target in range(b.num_vertices):
        image = {0: target}
        used = {target}
        stack = [0]
        ok = True
        while stack and ok:
            u = stack.pop()
            for s, u2 in ta[u].items():
                v2 = tb[image[u]].get(s)
                if v2 is None:
                    ok = False
                    break
                if u2 in image:
                    if image[u2] != v2:
                        ok = False
                        break
                elif v2 in used:
                    ok = False
                    break
                else:
                    image[u2] = v2
                    used.add(v2)
                    stack.append(u2)
        if ok and len(image) == a.num_vertices:
            return True
    return False


def conjugate_subgroups(A: Sequence[Word], B: Sequence[Word]) -> bool:
    return isomorphic(core(build_and_fold(A)), core(build_and_fold(B)))


def _image_generators(phi: Automorphism, subset: tuple[int, ...]) -> list[Word]:
    return [apply(phi, (i + 1,)) for i in subset]


def _rose_labels(g: StallingsGraph) -> frozenset[int] | None:
    """Label set if ``g`` is a one-vertex rose with distinct labels."""
    if g.num_vertices != 1:
        return None
    labels = [l for _, l, _ in g.edges]
    if len(set(labels)) != len(labels):
        return None
    return frozenset(l - 1 for l in labels)


def visibly_reducible(phi: Automorphism) -> list[list[int]] | None:
    """Disjoint generator subsets cyclically permuted up to conjugacy, or None.

    A subgroup is conjugate to a standard factor <S'> exactly when its core is
    the rose on S', so each subset has at most one successor and the search is
    a walk along that successor map.
    """
    n = phi.rank
    succ: dict[frozenset[int], frozenset[int] | None] = {}

    def successor(s: frozenset[int]):
        if s not in succ:
            g = core(build_and_fold(_image_generators(phi, tuple(sorted(s)))))
            succ[s] = _rose_labels(g)
        return succ[s]

    for size in range(1, n + 1):
        for combo in itertools.combinations(range(n), size):
            start = frozenset(combo)
            chain = [start]
            cur = successor(start)
            while cur is not None and cur != start and len(chain) <= n // size:
                if len(cur) != size or any(cur & c for c in chain):
                    cur = None
                    break
                chain.append(cur)
                cur = successor(cur)
            if cur != start:
                continue
            if len(chain) == 1 and size == n:
                continue
            return [sorted(c) for c in chain]
    return None


def is_visibly_reducible(phi: Automorphism) -> bool:
    return visibly_reducible(phi) is not None
