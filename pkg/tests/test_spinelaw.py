import math
from fractions import Fraction

import numpy as np
import pytest

from gwpenal.errors import DomainError, ResourceCapError
from gwpenal.offspring import generation_law
from gwpenal.spinelaw import (
    OffspringEvent, SpineLaw, compare_shapes, exact_Q, sample_spine_tree, shape_Q, spine_statistics, typings,
    verify_measure_equality, verify_subcritical_composite, weak_compositions,
)
from gwpenal.trees import enumerate_trees, format_typed_tree, parse_typed_tree

from .conftest import AMIN1, BOETTCHER, SCHROEDER, SUBCRITICAL


def test_weak_compositions():
    assert sorted(weak_compositions(2, 2)) == [(0, 2), (1, 1), (2, 0)]
    assert sum(1 for _ in weak_compositions(3, 3)) == math.comb(5, 2)
    assert list(weak_compositions(1, 0)) == []


def test_event_validation():
    with pytest.raises(DomainError):
        SpineLaw(SCHROEDER, 1).offspring_probability(1, 0, OffspringEvent(2, (1, 1)))
    with pytest.raises(DomainError):
        SpineLaw(SUBCRITICAL, 1)


def test_p1_root_law_is_size_biased_with_a_uniform_spine():
    law = SpineLaw(SCHROEDER, 1)
    probs = {(ev.k, ev.types): pr for ev, pr in law.events(1, 0)}
    # k q_k / mu, split evenly between the children
    assert probs == {(1, (1,)): Fraction(1, 5), (2, (0, 1)): Fraction(2, 5), (2, (1, 0)): Fraction(2, 5)}


@pytest.mark.parametrize("p", [0, 1, 2, 3])
@pytest.mark.parametrize("h", [0, 1, 3])
def test_offspring_laws_are_normalized(p, h):
    law = SpineLaw(SCHROEDER, p)
    for ty in range(p + 1):
        assert law.normalization(ty, h) == 1


def test_float_offspring_laws_are_normalized():
    law = SpineLaw(AMIN1, 2, a=0.8)
    for ty in range(3):
        assert abs(law.normalization(ty, 2) - 1) < 1e-12


def test_shape_probability_is_the_sum_over_typings():
    law = SpineLaw(SCHROEDER, 2)
    for t in list(enumerate_trees(2, 2))[::3]:
        assert shape_Q(law, t, 2) == sum(exact_Q(law, tt, 2) for tt in typings(law, t))


def test_exact_Q_of_a_typed_tree():
    law = SpineLaw(SCHROEDER, 1)
    t = parse_typed_tree("1:(0:() 1:())")
    assert exact_Q(law, t, 1) == Fraction(2, 5)
    assert format_typed_tree(t) == "1:(0:() 1:())"
    with pytest.raises(DomainError):
        exact_Q(SpineLaw(SCHROEDER, 2), t, 1)


@pytest.mark.parametrize("q, p, a, n0, n", [
    (SCHROEDER, 1, 0, 0, 2), (SCHROEDER, 2, 0, 0, 2), (SCHROEDER, 2, 0, 1, 3),
    (AMIN1, 2, 0, 0, 2), (BOETTCHER, 1, 0, 0, 2), (SCHROEDER, 2, 1.0, 0, 2), (SCHROEDER, 3, 0, 0, 2),
])
def test_measure_equality(q, p, a, n0, n):
    report = verify_measure_equality(SpineLaw(q, p, a, n0), n, q.K)
    assert report.passed, report.to_json()
    assert report.exact == (a == 0)
    if report.exact:
        assert report.max_gap == 0 and report.sum_Q == 1


def test_measure_equality_grid_cap():
    with pytest.raises(ResourceCapError):
        verify_measure_equality(SpineLaw(SCHROEDER, 1), 4, 2)


@pytest.mark.parametrize("p", [0, 1, 2])
def test_subcritical_composite(p):
    report = verify_subcritical_composite(SUBCRITICAL, p, 0, 2, 2)
    assert report.passed and report.exact


def test_sampled_trees_are_valid_and_deterministic():
    law = SpineLaw(SCHROEDER, 2)
    t = sample_spine_tree(law, 5, rng_seed=11)
    assert t.root_type == 2
    assert all(m == 2 for m in t.type_mass_by_generation())
    assert sample_spine_tree(law, 5, rng_seed=11) == t
    assert parse_typed_tree(format_typed_tree(t)) == t


def test_sampler_node_cap():
    with pytest.raises(ResourceCapError) as err:
        sample_spine_tree(SpineLaw(SCHROEDER, 1), 40, rng_seed=1, max_nodes=50)
    assert err.value.stats["nodes"] > 50
    with pytest.raises(ResourceCapError):
        spine_statistics(SpineLaw(SCHROEDER, 1), 40, 100, rng_seed=1, max_nodes=1000)


def test_batch_statistics_invariants_and_determinism():
    law = SpineLaw(SCHROEDER, 2)
    a = spine_statistics(law, 6, 5000, rng_seed=3)
    b = spine_statistics(law, 6, 5000, rng_seed=3)
    assert a.mass_conserved()
    assert np.array_equal(a.z, b.z) and a.shapes == b.shapes
    assert np.all(a.z[:, -1] >= 1)


def test_p0_generation_sizes_follow_the_plain_law():
    stats = spine_statistics(SpineLaw(SCHROEDER, 0), 3, 40000, rng_seed=5)
    law = generation_law(SCHROEDER, 3)
    for z, w in enumerate(law):
        w = float(w)
        if w < 1e-3:
            continue
        freq = float(np.mean(stats.z[:, 3] == z))
        assert abs(freq - w) <= 3 * math.sqrt(w * (1 - w) / 40000)


def test_spine_position_is_uniform():
    N = 40000
    stats = spine_statistics(SpineLaw(SCHROEDER, 1), 2, N, rng_seed=9)
    sigma = math.sqrt(0.4 * 0.6 / N)
    assert abs(stats.root_events[(2, (1, 0))] / N - 0.4) <= 3 * sigma
    assert abs(stats.root_events[(2, (0, 1))] / N - 0.4) <= 3 * sigma


@pytest.mark.parametrize("p", [0, 1, 2])
def test_depth_two_shapes_match_exact_law(p):
    law = SpineLaw(SCHROEDER, p)
    checks = compare_shapes(spine_statistics(law, 2, 40000, rng_seed=100 + p), law)
    assert checks and all(c.passed for c in checks), [(c.tree, c.z_score) for c in checks]
