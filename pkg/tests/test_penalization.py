from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from gwpenal.errors import DomainError
from gwpenal.offspring import generation_law
from gwpenal.penalization import (
    PenalizationProblem, conditional_weight, density_check, everything, hilbert_to_monomial, limit_ratio,
    limit_value, monomial_to_hilbert, parse_event, parse_weight, poly_geometric, poly_laplace, ratio,
    tree_event, z_at_most, z_equals, z_in,
)
from gwpenal.trees import generation_size

from .conftest import AMIN1, BOETTCHER, CRITICAL, SCHROEDER, SUBCRITICAL


def _pgf_iterate(q, m, s):
    for _ in range(m):
        s = q.pgf(s)
    return s


def test_conditional_weight_against_convolution():
    # two parents, each with 0 or 2 children: Z' in {0, 2, 4} with mass 1/4, 1/2, 1/4
    s = Fraction(1, 3)
    brute = Fraction(1, 2) * 1 + Fraction(1, 4) * 6 * s**2
    assert conditional_weight(CRITICAL, 2, s, 2, 1) == brute == Fraction(2, 3)


@given(st.integers(0, 3), st.integers(0, 3), st.fractions(0, 1))
def test_conditional_weight_p0_is_a_pgf_power(z, m, s):
    assert conditional_weight(SCHROEDER, 0, s, z, m) == _pgf_iterate(SCHROEDER, m, s) ** z


@pytest.mark.parametrize("weight", [poly_geometric(1, Fraction(1, 2)), poly_geometric(2, Fraction(1, 3)),
                                    poly_laplace(1, 0), poly_laplace(2, 0)])
def test_ratio_of_everything_is_one(weight):
    assert ratio(PenalizationProblem(SCHROEDER, weight, everything(), 2), 3) == 1


@pytest.mark.parametrize("m", [1, 2, 5])
def test_extinction_weight_ratio_formula(m):
    # P(Z_1 = 1, Z_{1+m} = 0) / P(Z_{1+m} = 0)
    problem = PenalizationProblem(SCHROEDER, poly_geometric(0, Fraction(0)), z_equals(1), 1)
    expected = Fraction(1, 4) * _pgf_iterate(SCHROEDER, m, 0) / _pgf_iterate(SCHROEDER, m + 1, 0)
    assert ratio(problem, m) == expected


@pytest.mark.parametrize("q, weight, event, n, expected", [
    # E[Z_1 kappa^(Z_1 - 1) / gamma ; Z_1 = 1] = (1/4) (4/3)
    (SCHROEDER, poly_geometric(1, Fraction(1, 2)), z_equals(1), 1, Fraction(1, 3)),
    # E[Z_1 / mu ; Z_1 = 2] = (1/2) (2 / (5/4))
    (SCHROEDER, poly_laplace(1, 0), z_equals(2), 1, Fraction(4, 5)),
    (CRITICAL, poly_geometric(1, 1), z_equals(2), 1, 1),
    (AMIN1, poly_geometric(1, Fraction(1, 2)), z_equals(1), 1, 1),
    (BOETTCHER, poly_geometric(1, Fraction(1, 2)), z_equals(4), 2, 1),
    (SCHROEDER, poly_geometric(0, Fraction(0)), z_equals(1), 1, Fraction(1, 4)),
])
def test_limits(q, weight, event, n, expected):
    result = limit_ratio(PenalizationProblem(q, weight, event, n))
    assert result.limit == expected
    assert result.converged


def test_float_laplace_limit_converges():
    result = limit_ratio(PenalizationProblem(SCHROEDER, poly_laplace(2, 1.0), z_equals(2), 1))
    assert result.converged and 0 < result.limit < 1


def test_subcritical_geometric_limit_uses_the_original_law():
    result = limit_ratio(PenalizationProblem(SUBCRITICAL, poly_geometric(1, Fraction(1, 2)), z_equals(1), 1))
    assert result.limit == Fraction(1, 3) and result.converged


def test_limits_over_a_partition_sum_to_one():
    law = generation_law(SCHROEDER, 2)
    total = sum(limit_value(PenalizationProblem(SCHROEDER, poly_geometric(2, Fraction(3, 10)), z_equals(z), 2))
                for z, w in enumerate(law) if w)
    assert total == 1


def test_limit_does_not_depend_on_the_polynomial():
    event = z_in([1, 2])
    base = limit_ratio(PenalizationProblem(SCHROEDER, poly_geometric(2, 0.3), event, 1))
    other = PenalizationProblem(SCHROEDER, poly_geometric(2, 0.3, alpha=(Fraction(-7, 3), Fraction(2, 5))), event, 1)
    assert abs(ratio(other, 60) - float(base.limit)) <= 1e-6


def test_hilbert_monomial_round_trip():
    alpha = [Fraction(2), Fraction(-1, 3), Fraction(5, 7)]
    assert monomial_to_hilbert(hilbert_to_monomial(alpha)) == alpha
    with pytest.raises(DomainError):
        monomial_to_hilbert([1, 2])


def test_parse_event():
    assert parse_event("all") == everything()
    assert parse_event("z_eq:3") == z_equals(3)
    assert parse_event("z_in:1,2") == z_in([1, 2])
    assert parse_event("z_le:4") == z_at_most(4)
    for bad in ("z_eq:x", "nope", "z_gt:1"):
        with pytest.raises(DomainError):
            parse_event(bad)


def test_parse_weight():
    assert parse_weight("geom:p=1,s=1/2") == poly_geometric(1, Fraction(1, 2))
    w = parse_weight("laplace:p=2,a=0.5")
    assert w == poly_laplace(2, 0.5) and isinstance(w.a, float)
    for bad in ("geom:p=1", "cubic:p=1,s=1", "geom:p=x,s=1"):
        with pytest.raises(DomainError):
            parse_weight(bad)


def test_domain_errors():
    with pytest.raises(DomainError):
        PenalizationProblem(SCHROEDER, poly_geometric(1, 1), z_equals(1), 1)
    with pytest.raises(DomainError):
        PenalizationProblem(CRITICAL, poly_laplace(1, 0), z_equals(1), 1)
    with pytest.raises(DomainError):
        PenalizationProblem(SCHROEDER, poly_geometric(1, Fraction(1, 2)), z_equals(1), -1)
    with pytest.raises(DomainError):
        limit_ratio(PenalizationProblem(AMIN1, poly_geometric(1, 0), z_equals(1), 1))


def test_tree_event_matches_size_event():
    by_tree = PenalizationProblem(SCHROEDER, poly_geometric(1, Fraction(1, 2)),
                                  tree_event(lambda t: generation_size(t, 2) == 2), 2)
    by_size = PenalizationProblem(SCHROEDER, poly_geometric(1, Fraction(1, 2)), z_equals(2), 2)
    assert ratio(by_tree, 4) == ratio(by_size, 4)


def test_density_bridge():
    report = density_check(SUBCRITICAL, 2, functional=lambda t: generation_size(t, 1))
    assert report.exact and report.passed and report.max_gap == 0
    assert report.functional_lhs == report.functional_rhs
    with pytest.raises(DomainError):
        density_check(SCHROEDER, 2)
