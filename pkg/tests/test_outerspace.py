import json
import math
import os
import random
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freeout import _kernels
from freeout.freegroup import Automorphism, compose, invert, parse_automorphism, parse_word
from freeout.generators import whitehead_automorphisms
from freeout.graphs import core_graphs, rose
from freeout.outerspace import (
    GraphError,
    MarkedMetricGraph,
    SimplexSpec,
    adjacent_uniform_roses,
    candidates,
    displacement,
    displacement_float,
    dumbbell_graph,
    graph_from_json,
    graph_to_json,
    is_thin,
    min_displacement,
    shortest_circle,
    stretch_factor,
    theta_graph,
    thin_part,
    translation_length,
)

FIB = parse_automorphism("a->ab,b->a")
W2 = whitehead_automorphisms(2).elements


def random_point(rng, n=2):
    W = whitehead_automorphisms(n).elements
    g = rng.choice(core_graphs(n))
    X = MarkedMetricGraph.standard(g, [Fraction(rng.randint(1, 20)) for _ in range(g.num_edges)])
    return X.act(compose(*[rng.choice(W) for _ in range(rng.randint(1, 3))])).normalized()


def test_candidate_counts():
    kinds = lambda g: sorted(c.kind for c in candidates(MarkedMetricGraph.standard(g).spec))
    assert kinds(rose(2)) == ["infinity", "infinity", "simple", "simple"]
    assert kinds(theta_graph()) == ["simple"] * 3
    # both orientations of one loop relative to the other give distinct barbells
    assert kinds(dumbbell_graph()) == ["barbell", "barbell", "simple", "simple"]


def test_fibonacci_displacement_at_uniform_rose():
    X = MarkedMetricGraph.uniform_rose(2)
    assert displacement(X, FIB) == 2
    assert displacement(X, Automorphism.identity(2)) == 1


def test_min_displacement_fibonacci():
    r = min_displacement(MarkedMetricGraph.uniform_rose(2).spec, FIB)
    assert abs(float(r.value) - (1 + math.sqrt(5)) / 2) < 1e-9
    assert not r.boundary


def test_min_displacement_reducible_goes_thin():
    r = min_displacement(MarkedMetricGraph.uniform_rose(2).spec, parse_automorphism("a->a,b->ba"))
    assert r.boundary
    assert float(r.value) < 1 + 1e-6


def test_translation_length_is_class_function():
    X = MarkedMetricGraph.standard(theta_graph(), [Fraction(1), Fraction(2), Fraction(3)])
    w = parse_word("abAB")
    assert translation_length(X, w) == translation_length(X, parse_word("bABa"))
    assert translation_length(X, ()) == 0


def test_json_round_trip():
    X = MarkedMetricGraph.standard(dumbbell_graph(), [Fraction(1, 3), Fraction(1, 2), Fraction(1, 6)])
    Y = graph_from_json(json.dumps(graph_to_json(X)))
    assert Y.lengths == X.lengths and Y.marking == X.marking


def test_json_rejects_bad_input():
    with pytest.raises(GraphError):
        graph_from_json({"vertices": 1, "edges": [{"id": 1, "from": 0, "to": 0, "length": "-1"}]})
    with pytest.raises(GraphError):
        graph_from_json({"vertices": 1, "edges": [{"id": 1, "from": 0, "to": 0}], "marking": {"a": [7]}})
    with pytest.raises(GraphError):
        graph_from_json({"edges": []})


def test_marking_must_generate():
    with pytest.raises(GraphError):
        MarkedMetricGraph(SimplexSpec(rose(2), ((1,), (1, 1)), 0), (Fraction(1), Fraction(1)))


def test_thin_part():
    X = MarkedMetricGraph.standard(rose(2), [Fraction(1, 100), Fraction(99, 100)])
    assert is_thin(X, Fraction(1, 10))
    assert thin_part(X, Fraction(1, 10)) == frozenset({0})
    assert shortest_circle(X) == Fraction(1, 100)


def test_adjacent_roses_per_tree():
    X = MarkedMetricGraph.standard(theta_graph())
    roses = adjacent_uniform_roses(X)
    assert len(roses) == 3
    for rc in roses:
        assert rc.rose.volume == 1 and rc.rose.rank == 2


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_stretch_factor_properties(seed):
    rng = random.Random(seed)
    X, Y, Z = (random_point(rng) for _ in range(3))
    assert stretch_factor(X, X) == 1
    # asymmetric metric on volume-1 points: Lambda >= 1 and multiplicative triangle inequality
    assert stretch_factor(X, Y) >= 1
    assert stretch_factor(X, Z) <= stretch_factor(X, Y) * stretch_factor(Y, Z)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_displacement_is_conjugation_invariant(seed):
    rng = random.Random(seed)
    X = random_point(rng)
    zeta = compose(*[rng.choice(W2) for _ in range(3)])
    phi = compose(*[rng.choice(W2) for _ in range(3)])
    assert displacement(X.act(zeta), compose(invert(zeta), phi, zeta)) == displacement(X, phi)


def test_float_displacement_agrees_with_exact():
    rng = random.Random(4)
    for _ in range(20):
        X = random_point(rng, rng.choice((2, 3)))
        phi = compose(*[rng.choice(whitehead_automorphisms(X.rank).elements) for _ in range(3)])
        L = np.array([[float(x) for x in X.lengths]])
        assert abs(displacement_float(X.spec, phi, L)[0] - float(displacement(X, phi))) < 1e-12


def test_kernel_backends_agree():
    rng = np.random.default_rng(0)
    P = rng.integers(0, 5, (12, 5)).astype(float)
    Q = rng.integers(1, 3, (12, 5)).astype(float)
    L = rng.random((30, 5)) + 0.1
    assert np.allclose(_kernels.ratio_max_batch(P, Q, L), _kernels._ratio_max_batch_np(P, Q, L))
    v, i = _kernels.ratio_max(P, Q, L[0])
    w, j = _kernels._ratio_max_np(P, Q, L[0])
    assert i == j and abs(v - w) < 1e-12
    assert _kernels.BACKEND in ("numba", "numpy")


def test_numpy_fallback_flag():
    env = dict(os.environ, FREEOUT_NO_NUMBA="1")
    code = "from freeout import _kernels; print(_kernels.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
