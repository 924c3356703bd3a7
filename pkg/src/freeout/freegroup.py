"""Word algebra in a free group of finite rank.

Letters are nonzero integers: generator ``i`` (0-based) is ``i + 1`` and its
inverse is ``-(i + 1)``.  A word is a tuple of letters.  In text, generators
are the lowercase letters ``a, b, c, ...`` and uppercase denotes the inverse,
so ``"aB"`` is ``(1, -2)``.
"""

from __future__ import annotations

import functools
import itertools
import json
import string
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

Word = tuple[int, ...]

MAX_TEXT_RANK = 26


class WordError(ValueError):
    """Malformed letters, words or automorphism descriptions."""


@dataclass(frozen=True)
class Basis:
    rank: int
    symbols: tuple[str, ...] = ()

    def __post_init__(self):
        if self.rank < 1:
            raise WordError("rank must be positive")
        if not self.symbols:
            if self.rank > MAX_TEXT_RANK:
                raise WordError("default symbols only cover rank <= 26")
            object.__setattr__(self, "symbols", tuple(string.ascii_lowercase[: self.rank]))
        if len(self.symbols) != self.rank or len(set(self.symbols)) != self.rank:
            raise WordError("basis symbols must be %d distinct names" % self.rank)


def letter_key(x: int) -> int:
    """Sort key realising the fixed letter order a < A < b < B < ..."""
    return 2 * (abs(x) - 1) + (x < 0)


_LETTER_KEYS = {x: letter_key(x) for i in range(1, 33) for x in (i, -i)}


def word_key(w: Word) -> tuple[int, ...]:
    try:
        return tuple(map(_LETTER_KEYS.__getitem__, w))
    except KeyError:
        return tuple(map(letter_key, w))


def inverse(w: Word) -> Word:
    return tuple(-x for x in reversed(w))


def reduce(letters: Iterable[int], rank: int | None = None) -> Word:
    """Freely reduce a letter sequence.

    >>> reduce((1, 2, -2))
    (1,)
    """
    out: list[int] = []
    for x in letters:
        if x == 0 or (rank is not None and abs(x) > rank):
            raise WordError("letter %r outside basis of rank %r" % (x, rank))
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def multiply(*words: Word) -> Word:
    return reduce(itertools.chain.from_iterable(words))


def strip_conjugation(w: Word) -> tuple[Word, Word]:
    """Split a reduced word as ``u c u^-1`` with ``c`` cyclically reduced."""
    i, j = 0, len(w) - 1
    while i < j and w[i] == -w[j]:
        i += 1
        j -= 1
    return w[:i], w[i : j + 1]


def min_rotation(w: Word) -> Word:
    if not w:
        return w
    return min((w[i:] + w[:i] for i in range(len(w))), key=word_key)


def cyclic_reduce(w: Word) -> Word:
    """Cyclically reduced, lexicographically least rotation of the class of ``w``."""
    return min_rotation(strip_conjugation(reduce(w))[1])


def unoriented_class(w: Word) -> Word:
    """Representative of the conjugacy class of w up to inversion (a circle's word)."""
    return min(cyclic_reduce(w), cyclic_reduce(inverse(w)), key=word_key)


def cyclic_length(w: Word) -> int:
    return len(strip_conjugation(reduce(w))[1])


def conjugate(w: Word, u: Word) -> Word:
    """Return ``u^-1 w u``."""
    return multiply(inverse(u), w, u)


def parse_word(text: str, rank: int | None = None) -> Word:
    text = text.strip()
    if text == "1":
        return ()
    letters = []
    for pos, ch in enumerate(text):
        if not ch.isalpha() or not ch.isascii():
            raise WordError("bad letter %r at position %d" % (ch, pos))
        i = ord(ch.lower()) - ord("a") + 1
        letters.append(i if ch.islower() else -i)
    return reduce(letters, rank)


def format_word(w: Word) -> str:
    return "".join(
        string.ascii_lowercase[x - 1] if x > 0 else string.ascii_uppercase[-x - 1] for x in w
    )


def all_reduced_words(rank: int, length: int) -> Iterator[Word]:
    letters = [x for i in range(1, rank + 1) for x in (i, -i)]

    def grow(prefix: Word) -> Iterator[Word]:
        if len(prefix) == length:
            yield prefix
            return
        for x in letters:
            if not prefix or prefix[-1] != -x:
                yield from grow(prefix + (x,))

    yield from grow(())


def cyclic_words(rank: int, max_length: int) -> list[Word]:
    """Canonical representatives of all nontrivial conjugacy classes up to a length."""
    return list(_cyclic_words(rank, max_length))


@functools.lru_cache(maxsize=32)
def _cyclic_words(rank: int, max_length: int) -> tuple[Word, ...]:
    seen = set()
    for n in range(1, max_length + 1):
        for w in all_reduced_words(rank, n):
            if w[0] != -w[-1]:
                seen.add(min_rotation(w))
    return tuple(sorted(seen, key=lambda w: (len(w), word_key(w))))


@dataclass(frozen=True)
class Automorphism:
    """An automorphism given by the images of the basis generators.

    Construction validates surjectivity unless ``check=False`` is passed by a
    caller that already holds a certificate (e.g. a product of certified maps).
    """

    images: tuple[Word, ...]
    check: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        images = tuple(reduce(w, len(self.images)) for w in self.images)
        object.__setattr__(self, "images", images)
        if self.check and not is_automorphism(images):
            raise WordError("images %s do not generate F_%d" % (self, self.rank))
        object.__setattr__(self, "check", True)

    @property
    def rank(self) -> int:
        return len(self.images)

    @classmethod
    def identity(cls, rank: int) -> "Automorphism":
        return cls(tuple((i,) for i in range(1, rank + 1)), check=False)

    @classmethod
    def parse(cls, text: str) -> "Automorphism":
        return parse_automorphism(text)

    def __call__(self, w: Word) -> Word:
        return apply(self, w)

    def __str__(self) -> str:
        return format_automorphism(self)

    def is_identity(self) -> bool:
        return all(w == (i + 1,) for i, w in enumerate(self.images))

    def to_json(self) -> dict:
        return {"rank": self.rank, "images": [format_word(w) for w in self.images]}


def parse_automorphism(text: str) -> Automorphism:
    """Parse ``"a->ab,b->a"``, or the JSON form ``{"rank":2,"images":["ab","a"]}``."""
    text = text.strip()
    if text.startswith("{"):
        try:
            data = json.loads(text)
            rank = int(data["rank"])
            images = data["images"]
        except (ValueError, KeyError, TypeError) as exc:
            raise WordError("bad automorphism JSON: %s" % exc) from None
        if len(images) != rank:
            raise WordError("expected %d images, got %d" % (rank, len(images)))
        return Automorphism(tuple(parse_word(w, rank) for w in images))
    pairs = {}
    for pos, chunk in enumerate(text.split(",")):
        if "->" not in chunk:
            raise WordError("pair %d (%r) is not of the form g->word" % (pos, chunk))
        lhs, rhs = (s.strip() for s in chunk.split("->", 1))
        if len(lhs) != 1 or not lhs.islower():
            raise WordError("pair %d: left side %r must be a lowercase generator" % (pos, lhs))
        if lhs in pairs:
            raise WordError("generator %r given twice" % lhs)
        pairs[lhs] = rhs
    rank = len(pairs)
    if sorted(pairs) != list(string.ascii_lowercase[:rank]):
        raise WordError("generators must be exactly %s" % string.ascii_lowercase[:rank])
    return Automorphism(tuple(parse_word(pairs[g], rank) for g in string.ascii_lowercase[:rank]))


def format_automorphism(phi: Automorphism) -> str:
    return ",".join(
        "%s->%s" % (string.ascii_lowercase[i], format_word(w) or "1")
        for i, w in enumerate(phi.images)
    )


def apply(phi: Automorphism, w: Word) -> Word:
    out: list[int] = []
    for x in w:
        img = phi.images[x - 1] if x > 0 else inverse(phi.images[-x - 1])
        for y in img:
            if out and out[-1] == -y:
                out.pop()
            else:
                out.append(y)
    return tuple(out)


def compose(*maps: Automorphism) -> Automorphism:
    """``compose(f, g)`` is ``f o g``: apply ``g`` first."""
    result = maps[-1]
    for phi in reversed(maps[:-1]):
        if phi.rank != result.rank:
            raise WordError("rank mismatch")
        result = Automorphism(tuple(apply(phi, w) for w in result.images), check=False)
    return result


def invert(phi: Automorphism) -> Automorphism:
    from .stallings import fold_with_preimages

    rose = fold_with_preimages(phi.images)
    if rose is None:
        raise WordError("%s is not invertible" % phi)
    return Automorphism(rose, check=False)


def is_automorphism(images: Sequence[Word], rank: int | None = None) -> bool:
    """True iff the words generate the free group of rank ``len(images)``."""
    if rank is not None and len(images) != rank:
        raise WordError("expected %d images, got %d" % (rank, len(images)))
    from .stallings import fold_with_preimages

    return fold_with_preimages(tuple(images)) is not None


def inner(rank: int, u: Word) -> Automorphism:
    """Conjugation ``g -> u g u^-1``."""
    return Automorphism(tuple(multiply(u, (i,), inverse(u)) for i in range(1, rank + 1)), check=False)


def conjugate_by(zeta: Automorphism, phi: Automorphism, zeta_inverse: Automorphism | None = None) -> Automorphism:
    """``zeta phi zeta^-1``; pass ``zeta_inverse`` to skip inverting zeta."""
    return compose(zeta, phi, invert(zeta) if zeta_inverse is None else zeta_inverse)


def _max_ratio(phi: Automorphism, max_length: int) -> Fraction:
    num, den = 0, 1
    for g in _cyclic_words(phi.rank, max_length):
        c = cyclic_length(apply(phi, g))
        if c * den > num * len(g):
            num, den = c, len(g)
    return Fraction(num, den)


def norm(phi: Automorphism) -> Fraction:
    """max ||phi(g)|| / ||g|| over cyclic words g of length 1 and 2."""
    return _max_ratio(phi, 2)


def brute_force_norm(phi: Automorphism, max_length: int = 6) -> Fraction:
    return _max_ratio(phi, max_length)


def _conj_letter(w: Word, x: int) -> Word:
    """Reduced ``x^-1 w x`` for a reduced word w."""
    if not w:
        return w
    if w[0] == x:
        rest = w[1:]
        return rest[:-1] if rest and rest[-1] == -x else rest + (x,)
    if w[-1] == -x:
        return (-x,) + w[:-1]
    return (-x,) + w + (x,)


def _conj_letter_length(w: Word, x: int) -> int:
    if not w:
        return 0
    if w[0] == x:
        r = len(w) - 1
        return r - 1 if r and w[-1] == -x else r + 1
    return len(w) if w[-1] == -x else len(w) + 2


def outer_key(phi: Automorphism) -> tuple[Word, ...]:
    """Exact canonical representative of the outer class of ``phi``.

    Over conjugators ``p`` (vertices of the Cayley tree), the total length of
    ``p^-1 phi(x_i) p`` is a sum of convex functions; its minimum set is a
    finite subtree.  The key is the least image tuple over that subtree.
    """
    images = phi.images
    if phi.rank == 1:
        return images
    letters = [x for i in range(1, phi.rank + 1) for x in (i, -i)]
    cur = sum(len(w) for w in images)
    improved = True
    while improved:
        improved = False
        for x in letters:
            val = sum(_conj_letter_length(w, x) for w in images)
            if val < cur:
                images = tuple(_conj_letter(w, x) for w in images)
                cur, improved = val, True
                break
    # walk the subtree of minimizers; p is tracked only to avoid revisits
    best = None
    stack, seen = [((), images)], {()}
    while stack:
        p, cand = stack.pop()
        k = tuple(word_key(w) for w in cand)
        if best is None or k < best[0]:
            best = (k, cand)
        for x in letters:
            if p and p[-1] == -x:
                q = p[:-1]
            else:
                q = p + (x,)
            if q in seen or sum(_conj_letter_length(w, x) for w in cand) != cur:
                continue
            seen.add(q)
            stack.append((q, tuple(_conj_letter(w, x) for w in cand)))
    return best[1]


def is_inner(phi: Automorphism) -> bool:
    return outer_key(phi) == outer_key(Automorphism.identity(phi.rank))


def same_outer_class(phi: Automorphism, psi: Automorphism) -> bool:
    return outer_key(phi) == outer_key(psi)
