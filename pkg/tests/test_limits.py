import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from gwpenal.errors import ConvergenceError, DomainError, VerificationError
from gwpenal.limits import (
    LaplaceTransform, b_series, boettcher_K0, critical_moment_polynomial, estimate_Cp, estimate_boettcher,
    expected_hilbert, laplace_transform, phi_derivatives, w_moments,
)
from gwpenal.offspring import OffspringDistribution, characterize, generation_law

from .conftest import AMIN1, BOETTCHER, CRITICAL, SCHROEDER, SUBCRITICAL, Q
from .strategies import rational_laws


def _moments_by_hand(q):
    # differentiate phi(mu a) = f(phi(a)) at 0 up to order 3; m_k = E[W^k]
    mu = q.mean
    # factorial_moment(j) is f^(j)(1) / j!
    f2, f3 = 2 * q.factorial_moment(2), 6 * q.factorial_moment(3)
    m2 = f2 / (mu**2 - mu)
    m3 = (f3 + 3 * f2 * m2) / (mu**3 - mu)
    return [1, 1, m2, m3]


@pytest.mark.parametrize("q", [SCHROEDER, AMIN1, BOETTCHER, Q("1/5", "1/5", "1/5", "2/5")])
def test_w_moments_against_hand_derivation(q):
    c = w_moments(q, 3)
    m = _moments_by_hand(q)
    assert [(-1) ** k * math.factorial(k) * c[k] for k in range(4)] == m


def test_w_second_moment_from_variance_formula():
    # Var W = sigma^2 / (mu (mu - 1))
    q = SCHROEDER
    sigma2 = 2 * q.factorial_moment(2) + q.mean - q.mean**2
    var = sigma2 / (q.mean * (q.mean - 1))
    assert 2 * w_moments(q, 2)[2] == var + 1 == Fraction(16, 5)


@given(rational_laws(min_mean=1))
def test_w_mean_is_one(q):
    c = w_moments(q, 2)
    assert c[0] == 1 and c[1] == -1 and c[2] > 0


def test_phi_at_zero_and_first_derivative():
    for q in (SCHROEDER, AMIN1, BOETTCHER):
        L = laplace_transform(q)
        assert L.phi(0) == 1
        assert L.derivatives(Fraction(0), 1)[1] == -1
        assert abs(L.derivatives(0.0, 1)[1] + 1) < 1e-15


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_schroeder_residual(a):
    L = laplace_transform(SCHROEDER)
    assert L.schroeder_residual(a) <= 10 * L.tol


@pytest.mark.parametrize("a", [0.0, 1.0])
def test_complete_monotonicity_signs(a):
    vals = laplace_transform(SCHROEDER).derivatives(a, 3)
    assert all((-1) ** k * v >= 0 for k, v in enumerate(vals))


def test_phi_derivative_against_finite_difference():
    L = laplace_transform(SCHROEDER)
    h = 1e-4
    fd = (L.phi(1 + h) - L.phi(1 - h)) / (2 * h)
    assert abs(L.derivatives(1.0, 1)[1] / fd - 1) <= 1e-5


def test_phi_is_decreasing_between_kappa_and_one():
    L = laplace_transform(SCHROEDER)
    values = [L.phi(0.5 * i) for i in range(20)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert all(0.5 <= v <= 1 for v in values)


@pytest.mark.parametrize("a", [0.1, 1.0, 7.0])
def test_exp_seed_agrees_with_moment_seed(a):
    moment = LaplaceTransform(SCHROEDER).derivatives(a, 2)
    direct = LaplaceTransform(SCHROEDER, seed="exp").derivatives(a, 2)
    # the exp seed converges more slowly, so agreement is limited by its Cauchy stop
    assert max(abs(x - y) for x, y in zip(moment, direct)) <= 1e-8


def test_phi_approaches_kappa_at_a_power_rate():
    # phi(a) - kappa decays like a ** (log gamma / log mu), far slower than 1e-6 at a = 50
    L = laplace_transform(SCHROEDER)
    g50, g200 = L.phi(50.0) - 0.5, L.phi(200.0) - 0.5
    assert 1e-3 < g50 < 2e-3
    rate = math.log(0.75) / math.log(1.25)
    assert abs(g200 / g50 / 4**rate - 1) < 0.1
    exp_seed = LaplaceTransform(SCHROEDER, seed="exp").phi(50.0) - 0.5
    assert abs(exp_seed - g50) < 1e-8


def test_convergence_failure_reports_last_iterates():
    L = LaplaceTransform(SCHROEDER, tol=0.0, m_max=3)
    with pytest.raises(ConvergenceError) as err:
        L.phi(1.0)
    assert len(err.value.diagnostics) == 2


def test_domain_checks():
    with pytest.raises(DomainError):
        laplace_transform(SCHROEDER).phi(-1)
    with pytest.raises(DomainError):
        phi_derivatives(laplace_transform(SCHROEDER, 2), 1.0, 50)


def test_Cp_is_one_for_p_one():
    for s in (0.0, 0.3, 0.7):
        assert estimate_Cp(SCHROEDER, 1, s).value == 1


def test_C2_at_the_fixed_point_has_a_closed_form():
    # f_n''(k) / f_n'(k) -> f''(k) / (gamma (1 - gamma)) at s = kappa
    est = estimate_Cp(SCHROEDER, 2, 0.5, n_max=150)
    assert est.converged and abs(est.value - 16 / 3) < 1e-9


def test_C2_stabilizes_at_rate_gamma():
    est = estimate_Cp(SCHROEDER, 2, 0.3, n_max=150, tol=1e-8)
    assert est.converged and est.value > 0
    ratios = est.increment_ratios(start=20)
    ratios = [r for r in ratios[:20] if r > 0]
    assert ratios and all(abs(r / 0.75 - 1) <= 0.01 for r in ratios)


def test_C2_subcritical_stabilizes():
    est = estimate_Cp(SUBCRITICAL, 2, 0.5)
    assert est.converged and est.value > 0


def test_Cp_refuses_boettcher():
    with pytest.raises(DomainError):
        estimate_Cp(BOETTCHER, 2, 0.5)


def test_boettcher_constants():
    assert boettcher_K0(BOETTCHER) == 2
    for s in (0.2, 0.5, 0.8):
        b, _ = b_series(BOETTCHER, s)
        assert b < 0
        _, K0 = estimate_boettcher(BOETTCHER, 0, s, m_max=8)
        assert abs(K0.value - 2) < 1e-6 and K0.converged


def test_boettcher_K1_stabilizes():
    _, K1 = estimate_boettcher(BOETTCHER, 1, 0.5, m_max=8)
    assert K1.converged and K1.value > 0


def test_critical_moment_polynomials():
    assert critical_moment_polynomial(CRITICAL, 1).coeffs == [1]
    P2 = critical_moment_polynomial(CRITICAL, 2)
    # E[H_2(Z_n)] = n sigma^2 / 2 with sigma^2 = 1
    assert P2.coeffs == [0, Fraction(1, 2)] and P2.degree == 1
    for n in (3, 4, 5):
        assert P2(n) == expected_hilbert(generation_law(CRITICAL, n), 2)
    assert critical_moment_polynomial(Q("1/4", "1/2", "1/4"), 3).degree == 2


def test_critical_moment_polynomial_refuses_noncritical():
    with pytest.raises(DomainError):
        critical_moment_polynomial(SCHROEDER, 2)


def test_exact_and_float_zero_are_cached_separately():
    L = LaplaceTransform(SCHROEDER)
    assert L.derivatives(Fraction(0), 2)[2] == Fraction(16, 5)
    assert all(isinstance(v, float) for v in L.derivatives(0.0, 2))
