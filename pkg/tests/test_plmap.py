import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freeout.fixtures import double_barbell_map, equal_stretch_theta_map
from freeout.freegroup import Automorphism, compose, parse_automorphism, same_outer_class
from freeout.generators import whitehead_automorphisms
from freeout.graphs import core_graphs
from freeout.outerspace import MarkedMetricGraph, displacement
from freeout.plmap import (
    MapError,
    combinatorial_map,
    d_infinity_bound_holds,
    find_train_track,
    is_train_track,
    optimize,
    path_length,
    pl_from_vertex_images,
    point_at,
    reverse_path,
    simple_fold,
    tighten,
    weak_optimize,
)

FIB = parse_automorphism("a->ab,b->a")
Z = Fraction(0)


def random_map(seed, n=2):
    rng = random.Random(seed)
    W = whitehead_automorphisms(n).elements
    g = rng.choice(core_graphs(n))
    X = MarkedMetricGraph.standard(g, [Fraction(rng.randint(1, 9)) for _ in range(g.num_edges)]).normalized()
    phi = compose(*[rng.choice(W) for _ in range(rng.randint(1, 4))])
    vimg = []
    for _ in range(g.num_vertices):
        i = rng.randrange(g.num_edges)
        vimg.append(point_at(X, i, X.lengths[i] * Fraction(rng.randint(0, 8), 8)))
    return X, phi, pl_from_vertex_images(X, phi, vimg)


def test_tighten_cancels_backtracks():
    one = Fraction(1)
    assert tighten([(0, Z, one), (0, one, Z)]) == ()
    assert tighten([(0, Z, one), (0, one, Fraction(1, 2)), (1, Z, one)]) == ((0, Z, Fraction(1, 2)), (1, Z, one))
    p = ((0, Z, one), (1, Fraction(1, 2), one))
    assert path_length(reverse_path(p)) == path_length(p) == Fraction(3, 2)


def test_combinatorial_map_represents_automorphism():
    X = MarkedMetricGraph.uniform_rose(2)
    f = combinatorial_map(X, FIB)
    assert f.represented_automorphism() == FIB
    assert f.lip == 2
    # on the uniform rose the Fibonacci map already attains Lambda = 2
    assert f.lip == displacement(X, FIB) and f.is_optimal()


def test_equal_stretch_theta_family():
    for t in (0, Fraction(1, 3), 1):
        f = equal_stretch_theta_map(t)
        assert all(abs(float(s) - (1 + math.sqrt(2))) < 1e-12 for s in f.stretches)
        assert f.is_optimal() and f.is_self_map()
    with pytest.raises(ValueError):
        equal_stretch_theta_map(2)


def test_double_barbell_tension_graph():
    f = double_barbell_map()
    assert f.tension_graph() == frozenset({0, 1, 2, 3})
    assert f.lip == 2


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_weak_optimize_reaches_lambda(seed):
    X, phi, f = random_map(seed)
    lam = displacement(X, phi)
    r = weak_optimize(f, lam)
    assert abs(r.map.lip - lam) < Fraction(1, 10**9)
    assert d_infinity_bound_holds(r, 1e-9)
    assert same_outer_class(r.map.represented_automorphism(), phi)


@pytest.mark.parametrize("seed", range(8))
def test_weak_optimize_rank3(seed):
    X, phi, f = random_map(seed, 3)
    lam = displacement(X, phi)
    r = weak_optimize(f, lam)
    assert abs(r.map.lip - lam) < Fraction(1, 10**9)
    assert d_infinity_bound_holds(r, 1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_optimize_gives_optimal_map(seed):
    X, phi, f = random_map(seed)
    lam = displacement(X, phi)
    o = optimize(f, lam)
    assert o.is_optimal()
    assert abs(o.lip - lam) < Fraction(1, 10**9)
    assert same_outer_class(o.represented_automorphism(), phi)


def test_simple_fold_keeps_class_and_lip():
    X = MarkedMetricGraph.uniform_rose(2)
    f = optimize(combinatorial_map(X, FIB), displacement(X, FIB))
    turns = f.illegal_turns()
    assert turns
    h = simple_fold(f, turns[0])
    assert h.domain.rank == 2 and h.lip <= f.lip
    assert same_outer_class(h.represented_automorphism(), FIB)


def test_simple_fold_rejects_legal_turn():
    X = MarkedMetricGraph.uniform_rose(2)
    f = combinatorial_map(X, FIB)
    legal = [(a, b) for a in (1, -1, 2, -2) for b in (1, -1, 2, -2) if a != b and (a, b) not in f.illegal_turns()]
    with pytest.raises(MapError):
        simple_fold(f, legal[0])


def test_find_train_track_fibonacci():
    r = find_train_track(FIB)
    assert r.status == "train-track"
    assert abs(float(r.lam) - (1 + math.sqrt(5)) / 2) < 1e-9
    assert is_train_track(r.map)


def test_find_train_track_reducible_is_thin():
    r = find_train_track(parse_automorphism("a->a,b->ba"))
    assert r.status == "thin" and r.witness == [(1,)]


def test_find_train_track_finite_order():
    for text in ("a->b,b->a", "a->a,b->b"):
        r = find_train_track(parse_automorphism(text))
        assert r.status == "train-track" and r.lam == 1


def test_find_train_track_rank_mismatch():
    with pytest.raises(ValueError):
        find_train_track(FIB, start=MarkedMetricGraph.uniform_rose(3))


def test_map_json():
    f = combinatorial_map(MarkedMetricGraph.uniform_rose(2), FIB)
    data = f.to_json()
    assert data["lip"] == {"exact": "2", "decimal": 2.0}
    assert [e["id"] for e in data["edges"]] == [1, 2]
    assert Automorphism.identity(2) == combinatorial_map(MarkedMetricGraph.uniform_rose(2), Automorphism.identity(2)).represented_automorphism()
