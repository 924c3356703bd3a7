import os
import random
import time
from fractions import Fraction

import pytest

from freeout.decide import (
    SearchConfig,
    SearchError,
    _Closure,
    abelian_irreducibility_certificate,
    abelianization,
    build_S,
    conjugate_irreducible,
    invariant_factor_certificate,
    is_irreducible,
    is_primitive,
    norm_bound,
    periodic_primitive_classes,
    rank_one_factor_check,
)
from freeout.freegroup import Automorphism, compose, conjugate_by, norm, outer_key, parse_automorphism, parse_word
from freeout.generators import GeneratorSet, cmt_automorphisms
from freeout.stallings import visibly_reducible

FIB = parse_automorphism("a->ab,b->a")
SWAP = parse_automorphism("a->b,b->a")


def test_norm_bound_and_mu():
    assert norm_bound(2, 3) == 1458
    assert SearchConfig().resolve_mu(FIB) == 3
    assert SearchConfig(mu=Fraction(5, 2)).resolve_mu(FIB) == Fraction(5, 2)
    with pytest.raises(SearchError):
        SearchConfig(mu=2).resolve_mu(FIB)


def test_small_closure_is_complete_and_audited():
    state = build_S(SWAP, SearchConfig(mu=2, cap_norm=8))
    assert state.complete
    assert state.audit()
    assert len(state) == 42
    for key, (rep, word) in state.members.items():
        assert norm(rep) <= 8
        zeta = state.conjugator(word)
        assert outer_key(conjugate_by(zeta, SWAP)) == key


def test_identity_closure_is_a_point():
    state = build_S(Automorphism.identity(2))
    assert state.complete and len(state) == 1


@pytest.mark.skipif(not os.environ.get("FREEOUT_SLOW"), reason="full-bound closure takes minutes; set FREEOUT_SLOW=1")
def test_swap_closure_under_full_bound():
    state = build_S(SWAP, SearchConfig(mu=2, time_cap=3600))
    assert state.bound == 192
    assert state.complete and state.audit()
    assert outer_key(SWAP) in state.members


def test_closure_grows_with_the_cap():
    sizes = [len(build_S(SWAP, SearchConfig(mu=2, cap_norm=c))) for c in (4, 8, 16)]
    assert sizes == sorted(sizes) and sizes[0] < sizes[-1]


def test_closure_independent_of_generator_order():
    gens = cmt_automorphisms(2)
    order = list(range(len(gens)))
    random.Random(3).shuffle(order)
    shuffled = GeneratorSet(2, tuple(gens.elements[i] for i in order), tuple(gens.provenance[i] for i in order))
    keys = []
    for G in (gens, shuffled):
        c = _Closure(SWAP, G, Fraction(8), 10**6, time.perf_counter() + 60)
        while not c.exhausted():
            c.step()
        keys.append(set(c.state.members))
    assert keys[0] == keys[1]


def test_node_cap_gives_incomplete_state():
    state = build_S(SWAP, SearchConfig(mu=2, cap_norm=16, node_cap=10))
    assert not state.complete and state.reason


def test_conjugate_identity_witness():
    v = conjugate_irreducible(FIB, FIB)
    assert v.tag == "Conjugate" and v.word == () and v.to_json()["witness"] == ""


def test_conjugate_finds_verified_witness():
    G = cmt_automorphisms(2).elements
    zeta = compose(G[5], G[17])
    psi = conjugate_by(zeta, FIB)
    v = conjugate_irreducible(FIB, psi)
    assert v.tag == "Conjugate"
    assert outer_key(conjugate_by(v.witness, psi)) == outer_key(FIB)


def test_conjugate_without_lambda_filter_is_inconclusive_under_caps():
    v = conjugate_irreducible(FIB, compose(FIB, FIB), SearchConfig(time_cap=1.0), use_lambda_filter=False)
    assert v.tag == "Inconclusive"


def test_capped_search_never_claims_not_conjugate():
    v = conjugate_irreducible(
        FIB, compose(FIB, FIB), SearchConfig(cap_norm=2, time_cap=5.0), use_lambda_filter=False
    )
    assert v.tag == "Inconclusive"


def test_not_conjugate_by_lambda():
    v = conjugate_irreducible(FIB, compose(FIB, FIB))
    assert v.tag == "NotConjugate" and v.stats["lambda"][1] > v.stats["lambda"][0]


def test_reducible_input_is_reported():
    v = conjugate_irreducible(parse_automorphism("a->a,b->ba"), FIB)
    assert v.tag == "Reducible"


def test_rank_mismatch():
    with pytest.raises(SearchError):
        conjugate_irreducible(FIB, parse_automorphism("a->b,b->c,c->a"))


def test_irreducible_verdicts():
    v = is_irreducible(parse_automorphism("a->a,b->ba"))
    assert v.tag == "Reducible" and v.certificate["partition"] == [["a"]]
    v = is_irreducible(SWAP)
    assert v.tag == "Reducible" and v.certificate["partition"] == [["a"], ["b"]]
    v = is_irreducible(FIB, SearchConfig(time_cap=1.0))
    assert v.tag == "Inconclusive"


def test_reducible_found_after_conjugation():
    # not visibly reducible in the standard basis, but one CMT conjugation away
    phi = parse_automorphism("a->aba,b->A")
    assert visibly_reducible(phi) is None
    v = is_irreducible(phi, SearchConfig(time_cap=20.0))
    assert v.tag == "Reducible" and v.certificate["depth"] >= 1


def test_primitive_words():
    assert is_primitive(parse_word("ab"), 2)
    assert is_primitive(parse_word("aab"), 2)
    assert not is_primitive(parse_word("aa"), 2)
    assert not is_primitive(parse_word("abAB"), 2)


def test_periodic_classes():
    assert periodic_primitive_classes(parse_automorphism("a->a,b->ba")) == [(1,)]
    assert periodic_primitive_classes(FIB) == []
    assert rank_one_factor_check(FIB)["all_factor_ranks"]


def test_abelian_certificate():
    assert abelianization(FIB) == [[1, 1], [1, 0]]
    assert abelian_irreducibility_certificate(FIB)["det"] == -1
    assert abelian_irreducibility_certificate(SWAP) is None
    assert abelian_irreducibility_certificate(parse_automorphism("a->a,b->ba")) is None
    assert abelian_irreducibility_certificate(parse_automorphism("a->b,b->c,c->a")) is None


def test_invariant_factor_certificate():
    cert = invariant_factor_certificate(parse_automorphism("a->a,b->ba"), [(1,)])
    assert cert == {"invariant_subgroup": ["a"], "period": 1}
    assert invariant_factor_certificate(FIB, [(1,)]) is None
