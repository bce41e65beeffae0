"""The Laplace transform of the martingale limit ``W`` and related asymptotic constants.

``phi(a) = E[exp(-a W)]`` satisfies ``phi(a) = f_m(phi(a / mu**m))`` for every
``m``.  :class:`LaplaceTransform` evaluates it as the limit over ``m`` of
``f_m`` applied to a seed approximating ``phi`` near zero, carrying full jets
so that derivatives come out of the same iteration.  Two seeds exist:

``"moments"`` (default)
    the Taylor series of ``phi`` at 0 built from the exact moments of ``W``;
``"exp"``
    ``exp(-x)``, i.e. ``f_m(exp(-a / mu**m))``, carried as a jet in the
    Laplace variable so that values near 1 keep full precision.  This
    converges only like ``mu**-m`` and serves as an independent cross-check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from . import _linalg
from .errors import ConvergenceError, DomainError, VerificationError
from .jets import TaylorJet, compose, iterate_jets, jet_of_f, laplace_jets
from .numbers import LogNum, is_exact
from .offspring import BOETTCHER, CRITICAL, OffspringDistribution, characterize, generation_law

DEFAULT_CAUCHY_TOL = 1e-10
DEFAULT_RESIDUAL_TOL = 1e-8


def w_moments(q: OffspringDistribution, order: int) -> list:
    """Taylor coefficients ``phi^{(k)}(0) / k!`` for ``k = 0..order``.

    Differentiating Schroeder's equation ``f(phi(a)) = phi(mu a)`` at zero
    gives, with ``F_i = f^{(i)}(1) / i!`` and ``C(X) = sum_{j>=1} c_j X^j``,

        (mu**k - mu) c_k = sum_{i=2}^{k} F_i [X^k] C(X)**i,

    a triangular system solved exactly for rational ``q``.  ``c_1 = -1``
    encodes ``E[W] = 1``.
    """
    mu = q.mean
    if mu <= 1:
        raise DomainError("moments of W are defined here only for super-critical laws")
    F = [q.factorial_moment(i) for i in range(order + 1)]
    one = q.one
    c = [one, -one][: order + 1]
    # powers[i][d] = [X^d] C(X)**i, filled column by column
    powers = [[one] + [0 * one] * order]
    if order >= 1:
        powers.append([0 * one, -one] + [0 * one] * (order - 1))
    for k in range(2, order + 1):
        powers.append([0 * one] * (order + 1))
        rhs = 0 * one
        for i in range(2, k + 1):
            coef = sum(c[j] * powers[i - 1][k - j] for j in range(1, k - i + 2))
            powers[i][k] = coef
            rhs += F[i] * coef if i < len(F) else 0
        ck = rhs / (mu**k - mu)
        c.append(ck)
        powers[1][k] = ck
    return c


@dataclass
class LaplaceTransform:
    """``phi``, the Laplace transform of ``W`` for a super-critical ``q``."""

    q: OffspringDistribution
    order: int = 4
    tol: float = DEFAULT_CAUCHY_TOL
    m_max: int = 400
    seed: str = "moments"
    x_max: float = 0.02
    series_terms: int = 40
    _moments: list = field(default=None, init=False, repr=False)
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.q.mean <= 1:
            raise DomainError("the Laplace transform of W needs a super-critical law")
        if self.seed not in ("moments", "exp"):
            raise DomainError(f"unknown seed {self.seed!r}")

    @property
    def mu(self):
        return self.q.mean

    def moments(self) -> list:
        """Exact (or float, for float ``q``) Taylor coefficients of ``phi`` at 0."""
        if self._moments is None:
            self._moments = w_moments(self.q, max(self.order, self.series_terms))
        return self._moments

    def jet(self, a, p: int | None = None) -> TaylorJet:
        """Jet of ``phi`` at ``a``: coefficients ``phi^{(k)}(a) / k!``, ``k <= p``."""
        p = self.order if p is None else p
        if p > max(self.order, self.series_terms):
            raise DomainError(f"derivative order {p} above configured order {self.order}")
        if a < 0:
            raise DomainError("phi is evaluated on a >= 0")
        key = (a, p, is_exact(a))
        if key in self._cache:
            return self._cache[key]
        if a == 0 and self.seed == "moments":
            mom = self.moments()
            coeffs = tuple(mom[: p + 1]) if is_exact(a) else tuple(float(c) for c in mom[: p + 1])
            jet = TaylorJet(a, coeffs)
        else:
            jet = self._limit(float(a), p)
        self._cache[key] = jet
        return jet

    def _limit(self, a: float, p: int, depth_offset: int = 0) -> TaylorJet:
        mu = float(self.mu)
        m = 0
        while a / mu**m > self.x_max:
            m += 1
        m += depth_offset
        history = []
        prev = None
        for step in range(self.m_max):
            jet = self._approx(a, p, m + step)
            history.append(jet.coeffs)
            if prev is not None:
                gap = max(abs(x - y) / max(1.0, abs(y)) for x, y in zip(jet.coeffs, prev.coeffs))
                if gap < self.tol:
                    return jet
            prev = jet
        raise ConvergenceError(
            f"phi({a}) did not stabilise within {self.m_max} iterations", diagnostics=history[-2:]
        )

    def _approx(self, a: float, p: int, m: int) -> TaylorJet:
        """``f_m`` applied to the seed jet at ``x = a / mu**m``, rescaled to ``a``."""
        mu = float(self.mu)
        x = a / mu**m
        scale = mu**-m
        if self.seed == "exp":
            last = None
            for last in laplace_jets(self.q, m, x, p):
                pass
            return TaylorJet(a, tuple(c * scale**j for j, c in enumerate(last.jet.coeffs)))
        mom = [float(c) for c in self.moments()]
        seed = []
        for j in range(p + 1):
            acc = 0.0
            for k in range(len(mom) - 1, j - 1, -1):
                acc = acc * x + mom[k] * math.comb(k, j)
            seed.append(acc)
        jet = TaylorJet(x, tuple(c * scale**j for j, c in enumerate(seed)))
        for _ in range(m):
            jet = compose(jet_of_f(self.q, jet.value, p), jet)
        return TaylorJet(a, jet.coeffs)

    def phi(self, a):
        return self.jet(a, 0).value

    def derivatives(self, a, p: int) -> list:
        """``[phi(a), phi'(a), ..., phi^{(p)}(a)]``."""
        return self.jet(a, p).derivatives()

    def schroeder_residual(self, a) -> float:
        """``|f(phi(a)) - phi(a mu)|``.

        ``phi(a mu)`` is seeded two levels deeper than ``phi(a)`` would be, so
        the two sides do not share an iteration chain.
        """
        lhs = float(self.q.pgf(self.phi(a)))
        rhs = float(self._limit(float(a) * float(self.mu), 0, depth_offset=2).value) if a else 1.0
        return abs(lhs - rhs)


def phi(L: LaplaceTransform, a):
    return L.phi(a)


def phi_derivatives(L: LaplaceTransform, a, p: int) -> list:
    return L.derivatives(a, p)


# ---------------------------------------------------------------- asymptotic constants


@dataclass
class AsymptoticEstimate:
    kind: str
    value: float
    p: int
    s: float
    diagnostics: list
    converged: bool
    tol: float

    @property
    def iterations(self) -> int:
        return len(self.diagnostics)

    @property
    def last_gap(self) -> float:
        if len(self.diagnostics) < 2:
            return math.inf
        return abs(self.diagnostics[-1] - self.diagnostics[-2])

    def increment_ratios(self, start: int = 1) -> list:
        """Ratios of successive increments of the diagnostic sequence."""
        d = self.diagnostics
        inc = [d[i + 1] - d[i] for i in range(len(d) - 1)]
        return [inc[i + 1] / inc[i] for i in range(max(start, 0), len(inc) - 1) if inc[i] != 0]


def estimate_Cp(q: OffspringDistribution, p: int, s, n_max: int = 60, tol: float = 1e-8) -> AsymptoticEstimate:
    """Estimate ``C_p(s) = lim_n f_n^{(p)}(s) / f_n'(s)``.

    Non-critical laws must be in the Schroeder case; for critical laws the
    same quotient is returned with kind ``C_p_critical``.
    """
    crit = characterize(q)
    if crit.regime == BOETTCHER:
        raise DomainError("Boettcher case: use estimate_boettcher instead")
    if not 0 <= float(s) < 1:
        raise DomainError("s must lie in [0, 1)")
    if p < 1:
        raise DomainError("p must be at least 1")
    kind = "C_p_critical" if crit.regime == CRITICAL else "C_p_noncritical"
    diagnostics = []
    for n, jet in enumerate(iterate_jets(q, n_max, float(s), p)):
        if n == 0:
            continue
        diagnostics.append(float(jet.derivative(p) / jet.derivative(1)))
    est = AsymptoticEstimate(kind, diagnostics[-1], p, float(s), diagnostics, False, tol)
    est.converged = est.last_gap < tol
    return est


def b_series(q: OffspringDistribution, s: float, tol: float = 1e-16, j_max: int = 200):
    """``b(s) = log s + sum_j a**(-j-1) log(f_{j+1}(s) / f_j(s)**a)``.

    Returns ``(b, log_f)`` where ``log_f[j] = log f_j(s)`` for the terms used.
    """
    a = q.a_min
    probs = [float(x) for x in q.probs]
    L = math.log(s)
    log_f = [L]
    total = L
    for j in range(j_max):
        # log(f(x) / x**a) with x = exp(L): every exponent k - a is >= 0
        inner = sum(pk * math.exp((k - a) * L) for k, pk in enumerate(probs) if pk and k >= a)
        ell = math.log(inner)
        inc = ell / a ** (j + 1)
        total += inc
        L = a * L + ell
        log_f.append(L)
        if abs(inc) < tol and j > 2:
            break
    return total, log_f


def estimate_boettcher(q: OffspringDistribution, p: int, s: float, m_max: int = 8, tol: float = 1e-6):
    """Estimate ``b(s)`` and ``K_p(s)`` in the Boettcher case (``a_min >= 2``).

    ``K_p(s)`` is the limit of ``f_m^{(p)}(s) a**(-m p) exp(-a**m b(s))``,
    evaluated in log space from log-magnitude jets.
    """
    a = q.a_min
    if a < 2:
        raise DomainError("estimate_boettcher needs a_min >= 2")
    if not 0 < s < 1:
        raise DomainError("s must lie in (0, 1)")
    b, _ = b_series(q, s)
    b_est = AsymptoticEstimate("b", b, 0, s, [b], True, 0.0)
    diagnostics = []
    for m, jet in enumerate(iterate_jets(q, m_max, float(s), p, log_space="always")):
        coeff = jet.coeffs[p]
        log_deriv = coeff.log + math.lgamma(p + 1)
        diagnostics.append(math.exp(log_deriv - m * p * math.log(a) - a**m * b))
    est = AsymptoticEstimate("K_p", diagnostics[-1], p, s, diagnostics, False, tol)
    est.converged = est.last_gap < tol * max(1.0, abs(est.value))
    return b_est, est


def boettcher_K0(q: OffspringDistribution) -> float:
    """``q_a ** (-1 / (a - 1))``, the limit of ``f_m(s) exp(-a**m b(s))``."""
    a = q.a_min
    return float(q.probs[a]) ** (-1.0 / (a - 1))


# ---------------------------------------------------------------- critical moments


@dataclass
class MomentPolynomial:
    coeffs: list  # monomial basis, constant term first
    p: int
    verified_at: list

    @property
    def degree(self) -> int:
        d = len(self.coeffs) - 1
        while d > 0 and self.coeffs[d] == 0:
            d -= 1
        return d

    def __call__(self, n):
        acc = Fraction(0)
        for c in reversed(self.coeffs):
            acc = acc * n + c
        return acc


def expected_hilbert(law, p: int):
    """``E[H_p(Z)]`` for an exact law given as a list indexed by ``Z``."""
    return sum(w * math.comb(z, p) for z, w in enumerate(law) if w)


def critical_moment_polynomial(q: OffspringDistribution, p: int, extra: int = 4) -> MomentPolynomial:
    """Fit and verify the polynomial ``P`` with ``P(n) = E[H_p(Z_n)]``.

    ``P`` (degree ``p - 1``) is interpolated from ``n = 0..p-1`` using exact
    generation laws and checked at ``n = p..p+extra-1``.
    """
    if not q.exact:
        raise DomainError("critical_moment_polynomial runs in exact mode")
    if q.mean != 1:
        raise DomainError("critical_moment_polynomial needs a critical law")
    if p < 1:
        raise DomainError("p must be at least 1")
    values = [expected_hilbert(generation_law(q, n), p) for n in range(p + extra)]
    V = [[Fraction(n) ** d for d in range(p)] for n in range(p)]
    sol = _linalg.solve(V, [[v] for v in values[:p]])
    poly = MomentPolynomial([row[0] for row in sol], p, [])
    for n in range(p, p + extra):
        if poly(n) != values[n]:
            raise VerificationError(
                f"E[H_{p}(Z_{n})] = {values[n]} but the fitted polynomial gives {poly(n)}",
                report={"n": n, "expected": values[n], "fitted": poly(n)},
            )
        poly.verified_at.append(n)
    if poly.coeffs[-1] == 0:
        raise VerificationError(f"fitted polynomial has degree below {p - 1}")
    return poly


_TRANSFORMS: dict = {}


def laplace_transform(q: OffspringDistribution, order: int = 4) -> LaplaceTransform:
    """Shared :class:`LaplaceTransform` for ``q`` with at least ``order`` derivatives."""
    key = (q.probs, q.mode)
    L = _TRANSFORMS.get(key)
    if L is None or L.order < order:
        L = LaplaceTransform(q, order=max(order, 4))
        _TRANSFORMS[key] = L
    return L
