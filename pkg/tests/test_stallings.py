from hypothesis import given, settings
from hypothesis import strategies as st

from freeout.freegroup import apply, compose, conjugate, parse_automorphism, parse_word
from freeout.generators import whitehead_automorphisms
from freeout.stallings import (
    build_and_fold,
    conjugate_subgroups,
    core,
    fold_with_preimages,
    visibly_reducible,
)


def test_membership():
    H = build_and_fold([parse_word("aa"), parse_word("b")])
    assert H.is_folded()
    assert H.accepts(parse_word("aab"))
    assert H.accepts(parse_word("bAAb"))
    assert not H.accepts(parse_word("a"))
    assert not H.accepts(parse_word("ab"))


def test_whole_group_folds_to_rose():
    g = build_and_fold([parse_word("ab"), parse_word("b")])
    assert g.num_vertices == 1 and len(g.edges) == 2


def test_fold_with_preimages_inverts():
    phi = parse_automorphism("a->ab,b->a")
    pre = fold_with_preimages(phi.images)
    assert pre is not None
    for i, w in enumerate(pre):
        assert apply(phi, w) == (i + 1,)
    assert fold_with_preimages((parse_word("aa"), parse_word("b"))) is None


def test_conjugate_subgroups():
    A = [parse_word("aba"), parse_word("b")]
    B = [conjugate(w, parse_word("ab")) for w in A]
    assert conjugate_subgroups(A, B)
    assert not conjugate_subgroups([parse_word("a")], [parse_word("b")])


def test_core_is_idempotent():
    g = core(build_and_fold([parse_word("Baab")]))
    assert core(g).num_vertices == g.num_vertices


whitehead2 = whitehead_automorphisms(2).elements


@settings(max_examples=50)
@given(st.lists(st.sampled_from(whitehead2), min_size=1, max_size=5))
def test_preimages_of_random_automorphisms(ms):
    phi = compose(*ms)
    pre = fold_with_preimages(phi.images)
    assert [apply(phi, w) for w in pre] == [(1,), (2,)]


def test_visibly_reducible_examples():
    assert visibly_reducible(parse_automorphism("a->a,b->ba")) == [[0]]
    assert visibly_reducible(parse_automorphism("a->b,b->a")) == [[0], [1]]
    assert visibly_reducible(parse_automorphism("a->ab,b->a")) is None
    # Fibonacci on <a, b> followed by conjugation by c
    assert visibly_reducible(parse_automorphism("a->Cabc,b->Cac,c->bc")) == [[0, 1]]
    assert visibly_reducible(parse_automorphism("a->Cbc,b->Cac,c->bc")) == [[0], [1]]
