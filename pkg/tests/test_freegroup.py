import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freeout.freegroup import (
    Automorphism,
    WordError,
    apply,
    brute_force_norm,
    compose,
    conjugate,
    conjugate_by,
    cyclic_length,
    cyclic_reduce,
    cyclic_words,
    format_automorphism,
    format_word,
    inner,
    inverse,
    invert,
    is_automorphism,
    is_inner,
    multiply,
    norm,
    outer_key,
    parse_automorphism,
    parse_word,
    reduce,
    same_outer_class,
    unoriented_class,
    word_key,
)
from freeout.generators import whitehead_automorphisms


def words(rank=3, max_size=12):
    letters = [x for i in range(1, rank + 1) for x in (i, -i)]
    return st.lists(st.sampled_from(letters), max_size=max_size).map(lambda xs: reduce(xs))


def autos(rank):
    W = whitehead_automorphisms(rank).elements
    return st.lists(st.sampled_from(W), min_size=1, max_size=4).map(lambda ms: compose(*ms))


def test_parse_and_format_round_trip():
    assert parse_word("aBc") == (1, -2, 3)
    assert format_word((1, -2, 3)) == "aBc"
    assert parse_word("") == ()
    phi = parse_automorphism("a->ab, b->a")
    assert phi.images == ((1, 2), (1,))
    assert format_automorphism(phi) == "a->ab,b->a"


@pytest.mark.parametrize("text", ["a->ab", "a->ab,b->ab", "a->ab,c->a", "a=>b,b->a", "a->a,b->b3"])
def test_parse_rejects_bad_input(text):
    with pytest.raises(WordError):
        parse_automorphism(text)


def test_reduction_and_inverse():
    assert reduce((1, 2, -2, -1, 3)) == (3,)
    assert inverse((1, -2)) == (2, -1)
    assert multiply((1, 2), (-2, 3)) == (1, 3)
    assert cyclic_reduce((2, 1, 3, -2)) == (1, 3)
    assert cyclic_length((-1, 2, 1)) == 1


def test_letter_order():
    assert sorted([(2,), (-1,), (1,), (-2,)], key=word_key) == [(1,), (-1,), (2,), (-2,)]


def test_cyclic_word_counts():
    # conjugacy classes of F_2 of lengths 1 and 2
    assert len(cyclic_words(2, 1)) == 4
    assert len(cyclic_words(2, 2)) == 4 + 8


@given(words(), words())
def test_multiply_inverse(u, v):
    assert multiply(u, v, inverse(v)) == u
    assert inverse(multiply(u, v)) == multiply(inverse(v), inverse(u))


@given(words(), words())
def test_conjugation_preserves_cyclic_class(u, w):
    assert cyclic_length(conjugate(w, u)) == cyclic_length(w)
    assert unoriented_class(conjugate(w, u)) == unoriented_class(w)


@settings(max_examples=60)
@given(autos(3), words())
def test_invert_is_two_sided(phi, w):
    psi = invert(phi)
    assert apply(psi, apply(phi, w)) == w
    assert apply(phi, apply(psi, w)) == w


@settings(max_examples=60)
@given(autos(2), autos(2), words(rank=2))
def test_compose_applies_right_to_left(phi, psi, w):
    assert apply(compose(phi, psi), w) == apply(phi, apply(psi, w))


@settings(max_examples=60)
@given(autos(3), words(rank=3, max_size=4))
def test_outer_key_ignores_inner_part(phi, u):
    assert outer_key(compose(inner(3, u), phi)) == outer_key(phi)
    assert same_outer_class(compose(phi, inner(3, u)), phi)


@settings(max_examples=40)
@given(autos(2), autos(2))
def test_outer_key_separates_classes(phi, psi):
    # the arbiter: phi psi^-1 is inner exactly when the keys agree
    assert (outer_key(phi) == outer_key(psi)) == is_inner(compose(phi, invert(psi)))


def test_inner_detection():
    assert is_inner(inner(2, (1, -2)))
    assert not is_inner(parse_automorphism("a->b,b->a"))


def test_is_automorphism():
    assert is_automorphism(((1, 2), (2,)))
    assert not is_automorphism(((1, 1), (2,)))
    assert not is_automorphism(((1, 2), (1, 2)))


def test_norm_examples():
    assert norm(parse_automorphism("a->ab,b->a")) == 2
    assert norm(Automorphism.identity(3)) == 1
    # the generator a has the longest image
    assert norm(parse_automorphism("a->aab,b->ab")) == Fraction(3, 1)


def test_norm_matches_brute_force_sample():
    rng = random.Random(0)
    W = whitehead_automorphisms(2).elements
    for _ in range(25):
        phi = compose(*[rng.choice(W) for _ in range(rng.randint(1, 6))])
        assert norm(phi) == brute_force_norm(phi, 6)


def test_conjugate_by_matches_definition():
    zeta = parse_automorphism("a->b,b->a")
    phi = parse_automorphism("a->ab,b->a")
    assert conjugate_by(zeta, phi) == compose(zeta, phi, invert(zeta))
    assert conjugate_by(zeta, phi, invert(zeta)) == conjugate_by(zeta, phi)
