"""Decision procedures for outer automorphism classes of F_n.

Conjugacy of irreducible classes and irreducibility detection both rest on the
finite set S of CMT conjugates of phi whose norm stays under a bound K.  K is
astronomically large, so the searches run under node and time caps and report
``Inconclusive`` honestly when a cap is hit before the closure is complete.
"""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from .freegroup import (
    Automorphism,
    Word,
    apply,
    compose,
    conjugate_by,
    cyclic_reduce,
    cyclic_words,
    format_word,
    invert,
    norm,
    outer_key,
    unoriented_class,
    word_key,
)
from .generators import GeneratorSet, cmt_automorphisms, whitehead_automorphisms
from .stallings import conjugate_subgroups, visibly_reducible

LAMBDA_RTOL = 1e-6


class SearchError(ValueError):
    pass


@dataclass
class SearchConfig:
    """Parameters of the bounded CMT closure.

    ``mu`` must exceed the norms involved; None picks the least integer above
    them.  The closure is pruned at norm K = n(3n-3) mu^(3n-1) unless
    ``cap_norm`` overrides it (a smaller cap makes completeness claims void,
    so verdicts that need a complete closure require ``use_full_K``).
    """

    mu: Fraction | None = None
    node_cap: int = 10**6
    time_cap: float = 60.0
    use_full_K: bool = True
    cap_norm: Fraction | None = None

    def resolve_mu(self, *maps: Automorphism) -> Fraction:
        top = max(norm(phi) for phi in maps)
        if self.mu is None:
            return Fraction(math.floor(top) + 1)
        mu = Fraction(self.mu)
        if mu <= top:
            raise SearchError("mu = %s must exceed the norm %s" % (mu, top))
        return mu


def norm_bound(n: int, mu) -> Fraction:
    """K = n(3n-3) mu^(3n-1)."""
    return n * (3 * n - 3) * Fraction(mu) ** (3 * n - 1)


@dataclass
class SearchState:
    """Visited outer classes with the CMT word that conjugates phi onto each."""

    root: Automorphism
    generators: GeneratorSet
    bound: Fraction
    members: dict = field(default_factory=dict)  # key -> (rep, word)
    complete: bool = False
    depth: int = 0
    reason: str | None = None
    elapsed: float = 0.0

    def __len__(self):
        return len(self.members)

    def __contains__(self, phi: Automorphism) -> bool:
        return outer_key(phi) in self.members

    def conjugator(self, word) -> Automorphism:
        """The automorphism zeta with zeta phi zeta^-1 equal to the member reached by ``word``."""
        zeta = Automorphism.identity(self.root.rank)
        for i in word:
            zeta = compose(self.generators.elements[i], zeta)
        return zeta

    def audit(self) -> bool:
        """Replay every witness and re-check the norm bound."""
        for key, (rep, word) in self.members.items():
            if norm(rep) > self.bound:
                return False
            if outer_key(conjugate_by(self.conjugator(word), self.root)) != key:
                return False
        return True

    def stats(self) -> dict:
        return {
            "size": len(self.members),
            "depth": self.depth,
            "complete": self.complete,
            "bound": str(self.bound),
            "seconds": round(self.elapsed, 3),
        }


class _Closure:
    """Breadth-first closure of one class under CMT conjugation, pruned by norm."""

    def __init__(self, phi, gens, bound, node_cap, deadline):
        self.state = SearchState(phi, gens, bound)
        self.gens = gens
        self.node_cap = node_cap
        self.deadline = deadline
        self.inverses = [invert(z) for z in gens.elements]
        self.state.members[outer_key(phi)] = (phi, ())
        self.frontier = deque([outer_key(phi)])
        self.layer_end = 1
        self.seen = 0

    def step(self):
        """Expand one frontier element; yields newly added (key, rep, word)."""
        st = self.state
        key = self.frontier.popleft()
        rep, word = st.members[key]
        out = []
        for i, zeta in enumerate(self.gens.elements):
            chi = conjugate_by(zeta, rep, self.inverses[i])
            if norm(chi) > st.bound:
                continue
            k = outer_key(chi)
            if k in st.members:
                continue
            st.members[k] = (chi, word + (i,))
            self.frontier.append(k)
            out.append((k, chi, word + (i,)))
        self.seen += 1
        if self.seen == self.layer_end:
            st.depth += 1
            self.layer_end += len(self.frontier)
        return out

    def exhausted(self) -> bool:
        if not self.frontier:
            self.state.complete = True
            return True
        if len(self.state.members) >= self.node_cap:
            self.state.reason = "node cap %d reached" % self.node_cap
            return True
        if time.perf_counter() > self.deadline:
            self.state.reason = "time cap reached"
            return True
        return False


def _bound(config: SearchConfig, n: int, mu) -> Fraction:
    K = norm_bound(n, mu)
    if config.cap_norm is not None:
        return Fraction(config.cap_norm)
    return K


def build_S(phi: Automorphism, config: SearchConfig | None = None) -> SearchState:
    """Closure of phi under conjugation by CMT maps, keeping classes of norm <= K."""
    config = config or SearchConfig()
    t0 = time.perf_counter()
    mu = config.resolve_mu(phi)
    gens = cmt_automorphisms(phi.rank)
    c = _Closure(phi, gens, _bound(config, phi.rank, mu), config.node_cap, t0 + config.time_cap)
    while not c.exhausted():
        c.step()
    c.state.elapsed = time.perf_counter() - t0
    return c.state


@dataclass
class Verdict:
    tag: str  # Conjugate | NotConjugate | Reducible | Irreducible | Inconclusive
    witness: Automorphism | None = None
    word: tuple[int, ...] | None = None
    certificate: dict | None = None
    reason: str | None = None
    stats: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out: dict = {"verdict": self.tag}
        if self.word is not None:
            out["witness"] = " ".join("z%d" % i for i in self.word)
        if self.witness is not None:
            out["witness_map"] = str(self.witness)
        if self.certificate is not None:
            out["certificate"] = self.certificate
        if self.reason is not None:
            out["reason"] = self.reason
        return out


def _train_track_lambda(phi: Automorphism):
    """(status, lambda, witness) from the displacement descent."""
    from .plmap import find_train_track

    r = find_train_track(phi)
    return r.status, r.lam, r.witness


def _lambda_differs(a, b) -> bool:
    a, b = float(a), float(b)
    return abs(a - b) > LAMBDA_RTOL * max(abs(a), abs(b))


def _verified_conjugator(zeta: Automorphism, phi: Automorphism, psi: Automorphism) -> bool:
    return outer_key(conjugate_by(zeta, psi)) == outer_key(phi)


def conjugate_irreducible(
    phi: Automorphism,
    psi: Automorphism,
    config: SearchConfig | None = None,
    use_lambda_filter: bool = True,
) -> Verdict:
    """Decide whether two irreducible classes are conjugate in Out(F_n).

    A stretch-factor mismatch answers NotConjugate at once.  Otherwise the
    norm-bounded CMT closures of phi and psi are grown alternately until they
    meet; a meeting gives zeta with zeta psi zeta^-1 = phi, checked before it
    is returned.  Exhausting a closure under the full bound without meeting
    answers NotConjugate.
    """
    config = config or SearchConfig()
    if phi.rank != psi.rank:
        raise SearchError("rank mismatch")
    t0 = time.perf_counter()
    mu = config.resolve_mu(phi, psi)
    n = phi.rank
    if outer_key(phi) == outer_key(psi):
        ident = Automorphism.identity(n)
        return Verdict("Conjugate", ident, (), stats={"size": 1, "depth": 0, "seconds": 0.0})
    stats: dict = {}
    if use_lambda_filter:
        s1, l1, w1 = _train_track_lambda(phi)
        s2, l2, w2 = _train_track_lambda(psi)
        for s, w, who in ((s1, w1, "phi"), (s2, w2, "psi")):
            if s == "thin":
                cert = invariant_factor_certificate(phi if who == "phi" else psi, w)
                if cert is not None:
                    return Verdict("Reducible", certificate=dict(cert, input=who), reason="input is reducible")
        stats["lambda"] = [float(l1), float(l2)]
        if s1 == s2 == "train-track" and _lambda_differs(l1, l2):
            stats["seconds"] = round(time.perf_counter() - t0, 3)
            return Verdict("NotConjugate", reason="stretch factors differ", stats=stats)
    gens = cmt_automorphisms(n)
    bound = _bound(config, n, mu)
    deadline = t0 + config.time_cap
    cap = max(1, config.node_cap // 2)
    a = _Closure(phi, gens, bound, cap, deadline)
    b = _Closure(psi, gens, bound, cap, deadline)
    while True:
        if a.exhausted() or b.exhausted():
            break
        for side, other in ((a, b), (b, a)):
            for k, _, word in side.step():
                if k in other.state.members:
                    wa = word if side is a else a.state.members[k][1]
                    wb = word if side is b else b.state.members[k][1]
                    # za phi za^-1 = zb psi zb^-1  =>  zeta = za^-1 zb
                    zeta = compose(invert(a.state.conjugator(wa)), b.state.conjugator(wb))
                    if not _verified_conjugator(zeta, phi, psi):
                        raise AssertionError("conjugacy witness failed verification")
                    stats.update(_merge_stats(a, b, t0))
                    return Verdict("Conjugate", zeta, _witness_word(gens, wa, wb), stats=stats)
            if side.exhausted():
                break
    stats.update(_merge_stats(a, b, t0))
    done = a.state.complete or b.state.complete
    if done and config.use_full_K and config.cap_norm is None:
        return Verdict("NotConjugate", reason="closure complete without a match", stats=stats)
    reason = a.state.reason or b.state.reason or "closure built under a reduced norm cap"
    return Verdict("Inconclusive", reason=reason, stats=stats)


def _inverse_index(gens: GeneratorSet) -> list[int | None]:
    keys = {}
    for i, z in enumerate(gens.elements):
        keys.setdefault(outer_key(z), i)
    return [keys.get(outer_key(invert(z))) for z in gens.elements]


def _witness_word(gens, wa, wb):
    # zeta = za^-1 zb, and za = z[wa[-1]] ... z[wa[0]]; report zeta as a word
    # applied right to left, i.e. the sequence of generators in order of application
    inv = _inverse_index(gens)
    if any(inv[i] is None for i in wa):
        return None
    return tuple(wb) + tuple(inv[i] for i in reversed(wa))


def _merge_stats(a: _Closure, b: _Closure, t0) -> dict:
    return {
        "size": len(a.state) + len(b.state),
        "depth": max(a.state.depth, b.state.depth),
        "complete": a.state.complete or b.state.complete,
        "seconds": round(time.perf_counter() - t0, 3),
    }


def _partition_json(parts) -> list[list[str]]:
    return [[format_word((i + 1,)) for i in p] for p in parts]


def is_irreducible(phi: Automorphism, config: SearchConfig | None = None) -> Verdict:
    """Irreducibility via visible reducibility on S and its one-step extension S+.

    Reducible carries the partition, the visibly reducible conjugate and the
    CMT word leading to it.  Irreducible needs the closure to complete under
    the full bound; a capped run is Inconclusive.
    """
    config = config or SearchConfig()
    t0 = time.perf_counter()
    n = phi.rank
    parts = visibly_reducible(phi)
    if parts is not None:
        cert = {"partition": _partition_json(parts), "conjugate": str(phi), "depth": 0}
        return Verdict("Reducible", Automorphism.identity(n), (), certificate=cert, stats={"size": 1})
    mu = config.resolve_mu(phi)
    gens = cmt_automorphisms(n)
    c = _Closure(phi, gens, _bound(config, n, mu), config.node_cap, t0 + config.time_cap)
    checked: set = set()

    def plus_check(rep, word):
        for i, zeta in enumerate(gens.elements):
            chi = conjugate_by(zeta, rep, c.inverses[i])
            k = outer_key(chi)
            if k in checked:
                continue
            checked.add(k)
            parts = visibly_reducible(chi)
            if parts is not None:
                w = word + (i,)
                cert = {"partition": _partition_json(parts), "conjugate": str(chi), "depth": len(w)}
                return Verdict("Reducible", c.state.conjugator(w), w, certificate=cert)
        return None

    v = plus_check(phi, ())
    while v is None and not c.exhausted():
        for _, rep, word in c.step():
            v = plus_check(rep, word)
            if v is not None:
                break
    c.state.elapsed = time.perf_counter() - t0
    if v is not None:
        v.stats = c.state.stats()
        return v
    if c.state.complete and config.use_full_K and config.cap_norm is None:
        return Verdict("Irreducible", stats=c.state.stats())
    return Verdict("Inconclusive", reason=c.state.reason or "closure built under a reduced norm cap", stats=c.state.stats())


# --- independent checks -------------------------------------------------------


def is_primitive(w: Word, rank: int) -> bool:
    """Whether w is part of a basis: Whitehead moves must reduce it to a single letter."""
    w = cyclic_reduce(w)
    if not w:
        return False
    moves = whitehead_automorphisms(rank).elements
    while len(w) > 1:
        for z in moves:
            u = cyclic_reduce(apply(z, w))
            if len(u) < len(w):
                w = u
                break
        else:
            return False
    return True


def periodic_primitive_classes(phi: Automorphism, max_length: int = 6, max_power: int | None = None) -> list[Word]:
    """Primitive circles (up to inversion) of length <= max_length fixed by some phi^k, k <= max_power."""
    n = phi.rank
    if max_power is None:
        max_power = 2 * n
    found = []
    for w in cyclic_words(n, max_length):
        c = unoriented_class(w)
        if c != w:
            continue
        if not is_primitive(c, n):
            continue
        u = c
        for _ in range(max_power):
            u = apply(phi, u)
            if unoriented_class(u) == c:
                found.append(c)
                break
    return sorted(found, key=word_key)


def rank_one_factor_check(phi: Automorphism, max_length: int = 6, max_power: int | None = None) -> dict:
    """Bounded search for a periodic conjugacy class of a rank-one free factor.

    In rank 2 every proper free factor has rank one, so an empty result is
    evidence of irreducibility up to the stated complexity; in higher rank
    larger factors are not examined.
    """
    hits = periodic_primitive_classes(phi, max_length, max_power)
    return {
        "periodic": [list(w) for w in hits],
        "max_length": max_length,
        "max_power": max_power if max_power is not None else 2 * phi.rank,
        "all_factor_ranks": phi.rank == 2,
    }


def abelianization(phi: Automorphism) -> list[list[int]]:
    """Integer matrix of phi on Z^n; column j is the exponent sum vector of phi(x_j)."""
    n = phi.rank
    M = [[0] * n for _ in range(n)]
    for j, w in enumerate(phi.images):
        for x in w:
            M[abs(x) - 1][j] += 1 if x > 0 else -1
    return M


def abelian_irreducibility_certificate(phi: Automorphism) -> dict | None:
    """Exact rank-2 test: no eigenvalue of the abelianization is a root of unity.

    A reducible class in rank 2 permutes at most two rank-one factor classes,
    so phi^2 sends a primitive g to a conjugate of g or g^-1 and the nonzero
    vector [g] satisfies M^2 v = +-v.  If the characteristic polynomial
    x^2 - t x + d has no root with x^4 = 1 this cannot happen, which proves
    phi (and every power of phi) irreducible.  Returns None when the test is
    silent or the rank is not 2.
    """
    if phi.rank != 2:
        return None
    M = abelianization(phi)
    t = M[0][0] + M[1][1]
    d = M[0][0] * M[1][1] - M[0][1] * M[1][0]
    # roots with x^4 = 1: x = +-1 gives 1 -+ t + d = 0; x = +-i gives d = 1, t = 0
    if 1 - t + d == 0 or 1 + t + d == 0 or (d == 1 and t == 0):
        return None
    return {"abelianization": M, "trace": t, "det": d}


def invariant_factor_certificate(phi: Automorphism, loops, max_power: int | None = None) -> dict | None:
    """Check that the subgroup carried by ``loops`` is phi-periodic up to conjugacy."""
    loops = [tuple(w) for w in loops or ()]
    if not loops:
        return None
    n = phi.rank
    max_power = max_power or 2 * n
    images = loops
    for k in range(1, max_power + 1):
        images = [apply(phi, w) for w in images]
        if conjugate_subgroups(loops, images):
            return {"invariant_subgroup": [format_word(w) for w in loops], "period": k}
    return None
