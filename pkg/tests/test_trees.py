from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from gwpenal.errors import DomainError, ResourceCapError
from gwpenal.offspring import generation_law
from gwpenal.trees import (
    TypedTree, UlamTree, count_trees, enumerate_trees, format_tree, format_typed_tree,
    generation_size, gw_probability, parse_tree, parse_typed_tree, restrict,
)

from .conftest import CRITICAL, SCHROEDER, Q


def labels(*xs):
    return UlamTree.from_labels([tuple(x) for x in xs])


T = labels((), (1,), (2,), (1, 1))


def test_restrict_drops_deeper_nodes():
    assert restrict(T, 1) == labels((), (1,), (2,))


def test_restrict_at_full_height_is_identity():
    assert restrict(T, T.height) == T


def test_restrict_below_root_is_a_domain_error():
    with pytest.raises(DomainError):
        restrict(UlamTree((), 2), 1)


@pytest.mark.parametrize("n, z", [(0, 1), (1, 2), (2, 1), (3, 0)])
def test_generation_size(n, z):
    assert generation_size(T, n) == z


def test_root_only_tree_has_one_node_at_height_zero():
    assert generation_size(labels(()), 0) == 1


def test_from_labels_rejects_gaps_and_orphans():
    with pytest.raises(DomainError):
        labels((), (2,))
    with pytest.raises(DomainError):
        labels((), (1, 1))


@pytest.mark.parametrize("height, k, count", [(1, 2, 3), (2, 1, 3), (2, 2, 13), (3, 2, 183)])
def test_enumeration_counts(height, k, count):
    trees = list(enumerate_trees(height, k))
    assert len(trees) == count == count_trees(height, k)
    assert len(set(trees)) == count


def _recursive_count(h, k):
    # independent recursion N(h) = sum_{j <= k} N(h-1)^j
    if h == 0:
        return 1
    prev = _recursive_count(h - 1, k)
    return sum(prev**j for j in range(k + 1))


@pytest.mark.parametrize("h, k", [(h, k) for h in range(4) for k in range(1, 4) if (h, k) != (3, 3)])
def test_enumeration_matches_recursive_count(h, k):
    assert sum(1 for _ in enumerate_trees(h, k)) == _recursive_count(h, k)


def test_enumeration_caps_are_errors():
    with pytest.raises(ResourceCapError) as err:
        list(enumerate_trees(5, 2))
    assert err.value.bound == "max_depth"
    with pytest.raises(ResourceCapError):
        list(enumerate_trees(2, 5))
    with pytest.raises(ResourceCapError):
        list(enumerate_trees(4, 4))


def test_enumeration_respects_root_height():
    trees = list(enumerate_trees(3, 2, root_height=2))
    assert len(trees) == 3 and all(t.root_height == 2 for t in trees)


def test_gw_probability_examples():
    assert gw_probability(SCHROEDER, labels(()), 1) == Fraction(1, 4)
    assert gw_probability(SCHROEDER, labels((), (1,), (2,)), 2) == Fraction(1, 32)
    assert gw_probability(SCHROEDER, UlamTree(((), (), ())), 1) == 0


@pytest.mark.parametrize("q", [SCHROEDER, CRITICAL, Q("1/3", "1/3", 0, "1/3")])
def test_gw_probabilities_sum_to_one(q):
    assert sum(gw_probability(q, t, 2) for t in enumerate_trees(2, q.K)) == 1


@pytest.mark.parametrize("n", [0, 1, 2])
def test_truncation_consistency(n):
    q = Q("1/3", "1/3", 0, "1/3")
    grouped = {}
    for u in enumerate_trees(n + 1, 3):
        key = restrict(u, n)
        grouped[key] = grouped.get(key, 0) + gw_probability(q, u, n + 1)
    for t in enumerate_trees(n, 3):
        assert grouped.get(t, 0) == gw_probability(q, t, n)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_generation_size_pushforward_matches_generation_law(n):
    q = SCHROEDER
    law = {}
    for t in enumerate_trees(n, 2):
        z = generation_size(t, n)
        law[z] = law.get(z, 0) + gw_probability(q, t, n)
    exact = generation_law(q, n)
    assert {z: w for z, w in law.items() if w} == {z: w for z, w in enumerate(exact) if w}


@given(st.integers(0, 3), st.integers(0, 2))
def test_restrict_preserves_generation_size(n, extra):
    for t in list(enumerate_trees(3, 2))[::7]:
        m = n + extra
        assert generation_size(restrict(t, m), n) == generation_size(t, n)
        assert restrict(restrict(t, m), n) == restrict(t, min(m, n))


def test_text_round_trip():
    for t in enumerate_trees(2, 2):
        assert parse_tree(format_tree(t)) == t
    assert format_tree(T) == "((()) ())"
    assert parse_tree(" ( ( ( ) ) ( ) ) ") == T


def test_typed_text_round_trip_and_validation():
    text = "2:(0:() 2:(1:() 1:()))"
    t = parse_typed_tree(text)
    assert format_typed_tree(t) == text
    assert t.root_type == 2
    assert t.type_mass_by_generation() == [2, 2, 2]
    assert parse_typed_tree(" 2 : ( 0:()  2:(1:() 1:()) ) ") == t
    with pytest.raises(DomainError):
        parse_typed_tree("2:(1:() 0:())")
    # a type-2 node whose children carry mass 1
    with pytest.raises(DomainError):
        parse_typed_tree("2:(0:() 1:(1:() 0:()))")


def test_typed_tree_rejects_type_sum_violation():
    with pytest.raises(DomainError):
        TypedTree((1, ((1, ()), (1, ()))))
