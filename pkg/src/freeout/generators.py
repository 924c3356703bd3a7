"""Finite generating sets of Out(F_n): rose symmetries, Whitehead and CMT maps."""

from __future__ import annotations

import functools
import itertools
import warnings
from dataclasses import dataclass

from .freegroup import Automorphism, Word, compose, invert, outer_key, reduce
from .graphs import TopologicalGraph, core_graphs, edge_index, spanning_trees, tree_paths

MAX_RANK = 3


@dataclass(frozen=True)
class GeneratorSet:
    rank: int
    elements: tuple[Automorphism, ...]
    provenance: tuple[str, ...]

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    @property
    def contains_identity(self) -> bool:
        return any(phi.is_identity() for phi in self.elements)

    @property
    def inversion_closed(self) -> bool:
        keys = {outer_key(phi) for phi in self.elements}
        return all(outer_key(invert(phi)) in keys for phi in self.elements)

    def to_json(self) -> dict:
        return {
            "rank": self.rank,
            "size": len(self.elements),
            "generators": [
                {"map": str(phi), "provenance": tag}
                for phi, tag in zip(self.elements, self.provenance)
            ],
        }


def signed_permutations(n: int):
    for perm in itertools.permutations(range(1, n + 1)):
        for signs in itertools.product((1, -1), repeat=n):
            yield Automorphism(tuple((s * p,) for s, p in zip(signs, perm)), check=False)


def rose_graph_automorphisms(n: int) -> GeneratorSet:
    if n < 1:
        raise ValueError("rank must be positive")
    elems = tuple(signed_permutations(n))
    return GeneratorSet(n, elems, ("rose-auto",) * len(elems))


def _whitehead_type2(n: int):
    for x in range(1, n + 1):
        for m in (x, -x):
            others = [g for g in range(1, n + 1) if g != x]
            for choice in itertools.product(range(4), repeat=len(others)):
                images: list[Word] = [(g,) for g in range(1, n + 1)]
                for g, c in zip(others, choice):
                    images[g - 1] = {
                        0: (g,),
                        1: reduce((g, m)),
                        2: reduce((-m, g)),
                        3: reduce((-m, g, m)),
                    }[c]
                yield Automorphism(tuple(images), check=False)


def whitehead_automorphisms(n: int) -> GeneratorSet:
    """Type-II Whitehead maps plus signed permutations, deduplicated by image tuple."""
    seen: dict[tuple, tuple[Automorphism, str]] = {}
    for phi in signed_permutations(n):
        seen.setdefault(phi.images, (phi, "rose-auto"))
    for phi in _whitehead_type2(n):
        seen.setdefault(phi.images, (phi, "whitehead"))
    elems = [v[0] for v in seen.values()]
    tags = [v[1] for v in seen.values()]
    return GeneratorSet(n, tuple(elems), tuple(tags))


def tree_change(g: TopologicalGraph, T: frozenset[int], T2: frozenset[int]) -> Automorphism:
    """The automorphism rho_T2 o rho_T^-1 between the roses X/T and X/T2.

    Petals of X/T are the edges outside T in index order, oriented as in X.
    """
    out1 = [i for i in range(g.num_edges) if i not in T]
    out2 = {e: k + 1 for k, e in enumerate(i for i in range(g.num_edges) if i not in T2)}
    paths = tree_paths(g, T)
    images = []
    for e in out1:
        E = e + 1
        loop = paths[g.origin(E)] + (E,) + tuple(-F for F in reversed(paths[g.terminus(E)]))
        word = [out2[edge_index(F)] * (1 if F > 0 else -1) for F in loop if edge_index(F) in out2]
        images.append(reduce(word))
    return Automorphism(tuple(images), check=False)


def tree_pair_automorphisms(n: int):
    """Yield ``(graph, T, T2, automorphism)`` for every core graph of rank n."""
    for g in core_graphs(n):
        trees = spanning_trees(g)
        for T, T2 in itertools.product(trees, repeat=2):
            yield g, T, T2, tree_change(g, T, T2)


@functools.lru_cache(maxsize=None)
def cmt_automorphisms(
    n: int, graph_budget: int | None = None, allow_large: bool = False, closure: str = "auto"
) -> GeneratorSet:
    """Change-of-maximal-tree automorphisms, closed under inverses.

    Petal labels of both roses are arbitrary, so with ``closure="full"`` the
    set is closed under pre- and post-composition with signed permutations.
    ``closure="raw"`` keeps one labelling per tree pair plus the signed
    permutations themselves; conjugating by a permutation preserves the norm,
    so both choices give the same norm-bounded conjugation closure.  Elements
    are deduplicated by outer class.  ``"auto"`` picks full up to rank 2.
    """
    if closure == "auto":
        closure = "full" if n <= 2 else "raw"
    if closure not in ("full", "raw"):
        raise ValueError("closure must be 'full' or 'raw'")
    if n > MAX_RANK:
        if not allow_large:
            raise ValueError("CMT enumeration supported up to rank %d" % MAX_RANK)
        warnings.warn("CMT enumeration at rank %d is very expensive" % n, RuntimeWarning)
    perms = list(signed_permutations(n))
    found: dict[tuple, tuple[Automorphism, str]] = {}

    def add(phi: Automorphism, tag: str):
        key = outer_key(phi)
        if key not in found:
            found[key] = (phi, tag)

    for phi in perms:
        add(phi, "rose-auto")
    raw = {}
    count = 0
    for g, T, T2, rho in tree_pair_automorphisms(n):
        count += 1
        if graph_budget is not None and count > graph_budget:
            break
        raw.setdefault(outer_key(rho), rho)
    for rho in raw.values():
        if closure == "raw":
            add(rho, "tree-pair")
            continue
        for sigma in perms:
            left = compose(sigma, rho)
            for tau in perms:
                add(compose(left, tau), "tree-pair")
    for phi, tag in list(found.values()):
        add(invert(phi), tag)
    items = sorted(found.items())
    return GeneratorSet(n, tuple(v[0] for _, v in items), tuple(v[1] for _, v in items))
