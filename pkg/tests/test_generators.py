import pytest

from freeout.freegroup import Automorphism, is_automorphism, norm, outer_key
from freeout.generators import (
    cmt_automorphisms,
    rose_graph_automorphisms,
    signed_permutations,
    tree_pair_automorphisms,
    whitehead_automorphisms,
)
from freeout.graphs import TopologicalGraph, core_graphs, rose, spanning_trees


def test_core_graph_counts():
    # rose, theta and dumbbell (barbell) in rank 2
    assert len(core_graphs(2)) == 3
    for g in core_graphs(3):
        assert g.rank == 3 and g.is_connected()
        assert all(g.valence(v) >= 3 for v in range(g.num_vertices))


def test_spanning_trees_of_theta():
    theta = TopologicalGraph(2, ((0, 1), (0, 1), (0, 1)))
    assert len(spanning_trees(theta)) == 3
    assert spanning_trees(rose(2)) == [frozenset()]


def test_signed_permutations():
    assert len(list(signed_permutations(2))) == 8
    assert len(list(signed_permutations(3))) == 48


@pytest.mark.parametrize("n", [2, 3])
def test_whitehead_generators_are_automorphisms(n):
    for phi in whitehead_automorphisms(n):
        assert is_automorphism(phi.images)


@pytest.mark.parametrize("n", [2, 3])
def test_cmt_set_properties(n):
    G = cmt_automorphisms(n)
    assert G.contains_identity
    assert G.inversion_closed
    keys = [outer_key(phi) for phi in G]
    assert len(set(keys)) == len(keys)
    for phi in G:
        assert is_automorphism(phi.images)


def test_cmt_rank_two_contains_rose_symmetries():
    keys = {outer_key(phi) for phi in cmt_automorphisms(2)}
    for phi in rose_graph_automorphisms(2):
        assert outer_key(phi) in keys


def test_cmt_closure_options():
    full = cmt_automorphisms(2, closure="full")
    raw = cmt_automorphisms(2, closure="raw")
    assert len(raw) <= len(full)
    with pytest.raises(ValueError):
        cmt_automorphisms(2, closure="bogus")
    with pytest.raises(ValueError):
        cmt_automorphisms(4)


def test_tree_change_norm_bound():
    # a change of maximal tree only moves each petal over tree edges
    for g, T, T2, phi in tree_pair_automorphisms(2):
        assert norm(phi) <= 3
        if T == T2:
            assert phi == Automorphism.identity(2)


def test_generator_set_json():
    data = cmt_automorphisms(2).to_json()
    assert data["rank"] == 2 and data["size"] == len(data["generators"])
    assert {"map", "provenance"} <= set(data["generators"][0])
