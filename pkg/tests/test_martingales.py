from fractions import Fraction

import pytest
from hypothesis import given

from gwpenal.combinatorics import hilbert
from gwpenal.errors import DomainError
from gwpenal.martingales import (
    G_eval, MartingaleSpec, a_coeffs, a_table, applicable_specs, uniqueness_solve, verify_martingale,
)
from gwpenal.offspring import generation_law

from .conftest import AMIN1, BOETTCHER, CRITICAL, SCHROEDER, SUBCRITICAL
from .strategies import rational_laws


def test_named_martingale_values():
    assert MartingaleSpec("ratio", SCHROEDER).evaluate(2, 3) == Fraction(48, 25)
    assert MartingaleSpec("extinction", SCHROEDER).evaluate(3, 2) == Fraction(1, 2)
    # kappa = 1/2, gamma = f'(1/2) = 3/4
    assert MartingaleSpec("sized_biased_extinct", SCHROEDER).evaluate(2, 2) == 2 * Fraction(1, 2) / Fraction(9, 16)
    unit = MartingaleSpec("schroeder_unit", AMIN1)
    assert unit.evaluate(2, 1) == 4 and unit.evaluate(2, 2) == 0
    b = MartingaleSpec("boettcher_unit", BOETTCHER)
    assert b.evaluate(2, 4) == 8 and b.evaluate(2, 5) == 0
    assert MartingaleSpec("critical_size", CRITICAL).evaluate(7, 3) == 3


def test_hypotheses_are_enforced():
    with pytest.raises(DomainError):
        MartingaleSpec("critical_size", SCHROEDER)
    with pytest.raises(DomainError):
        MartingaleSpec("schroeder_unit", SCHROEDER)
    with pytest.raises(DomainError):
        MartingaleSpec("boettcher_unit", AMIN1)
    with pytest.raises(DomainError):
        MartingaleSpec("penalized_p", CRITICAL)
    with pytest.raises(DomainError):
        MartingaleSpec("ratio", SCHROEDER, n0=1)
    with pytest.raises(DomainError):
        MartingaleSpec("nonsense", SCHROEDER)


def test_a_coefficients_at_zero():
    assert a_coeffs(SCHROEDER, 1, 0).values == (-1,)
    g = a_coeffs(SCHROEDER, 2, 0)
    # a_2^(2) = phi'(0)^2 and a_1^(2) = phi''(0) / 2
    assert g[2] == g.jet[1] ** 2 == 1
    assert g[1] == g.jet[2] == Fraction(8, 5)


def test_a_table_is_upper_triangular_in_its_indices():
    table = a_table(SCHROEDER, 3, 1, 0)
    assert set(table) == {(s, l) for l in range(1, 4) for s in range(1, l + 1)}
    # phi'(0) = -1 whatever the generation
    assert table[(1, 1)] == -1 and table[(3, 3)] == -1


def test_G_reductions():
    assert G_eval(SCHROEDER, 1, 0, 0, 5) == 5
    assert G_eval(SCHROEDER, 0, 0, 0, 5) == 1
    # p = 2: G(x) = H_1(x) + (5/8) H_2(x) at a = 0, n = 0
    for x in range(5):
        assert G_eval(SCHROEDER, 2, 0, 0, x) == hilbert(1, x) + Fraction(5, 8) * hilbert(2, x)
    with pytest.raises(DomainError):
        G_eval(SCHROEDER, 2, 0, 0, -1)


def test_every_applicable_martingale_passes(any_q):
    q = any_q
    for spec in applicable_specs(q):
        report = verify_martingale(spec, n_max=3)
        assert report.passed, spec.label()
        if report.exact:
            assert all(m == 1 for _, m in report.means)


@given(rational_laws(min_mean=1))
def test_penalized_martingales_on_random_laws(q):
    for p in (1, 2):
        spec = MartingaleSpec("penalized_p", q, p=p)
        assert spec.exact
        assert verify_martingale(spec, n_max=2).passed


def test_float_laplace_martingale_within_tolerance():
    report = verify_martingale(MartingaleSpec("penalized_p", SCHROEDER, p=2, a=0.7), n_max=3)
    assert not report.exact and report.passed and report.max_rel_gap <= 1e-9


def test_subcritical_penalized_is_a_martingale():
    for p in (0, 1, 2):
        assert verify_martingale(MartingaleSpec("subcritical_penalized", SUBCRITICAL, p=p), n_max=3).passed


class _Perturbed:
    def __init__(self, spec, at):
        self.spec, self.at = spec, at
        self.q, self.start, self.exact = spec.q, spec.start, spec.exact

    def evaluate(self, n, z):
        value = self.spec.evaluate(n, z)
        return value + Fraction(1, 1000) if (n, z) == self.at else value


def test_verifier_detects_a_single_perturbed_value():
    bad = _Perturbed(MartingaleSpec("penalized_p", SCHROEDER, p=2), at=(2, 3))
    report = verify_martingale(bad, n_max=3)
    assert not report.passed
    assert any(v[:2] == (2, 3) or v[0] == 1 for v in report.violations)


def test_uniqueness_system_example():
    r = uniqueness_solve(SCHROEDER, 2)
    assert r.polynomial(1) == [1]
    assert r.polynomial(2) == [1, Fraction(5, 8)]
    assert r.triangular and r.matches and r.det_F != 0


@pytest.mark.parametrize("p", [1, 2, 3])
def test_uniqueness_polynomials_have_the_claimed_moments(p):
    # E[P_p(Z_n)] = mu^(p n), computed from the exact generation law
    r = uniqueness_solve(SCHROEDER, p)
    coeffs = r.polynomial(p)
    for n in range(4):
        law = generation_law(SCHROEDER, n)
        mean = sum(w * sum(c * hilbert(j + 1, z) for j, c in enumerate(coeffs)) for z, w in enumerate(law))
        assert mean == SCHROEDER.mean ** (p * n)


def test_uniqueness_solution_fails_once_perturbed():
    r = uniqueness_solve(SCHROEDER, 2)
    C = [row[:] for row in r.C]
    C[0][1] += Fraction(1, 100)
    lhs = [[sum(r.F[i][k] * C[k][j] for k in range(2)) for j in range(2)] for i in range(2)]
    assert lhs != r.M


def test_uniqueness_rejects_float_and_noncritical_inputs():
    with pytest.raises(DomainError):
        uniqueness_solve(CRITICAL, 2)
