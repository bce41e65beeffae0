"""Limiting martingales as functions of ``(n, Z_n)`` and their verification.

Every martingale here is measurable with respect to ``Z_n``, so the
martingale property reduces to the one-step identity

    sum_y q^{*z}(y) M_{n+1}(y) = M_n(z)

over reachable ``z``, checked exactly for rational inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from . import _linalg
from .combinatorics import hilbert, power_coefficients
from .errors import DomainError, VerificationError
from .jets import iterate_jet
from .limits import laplace_transform
from .numbers import is_exact
from .offspring import (
    BOETTCHER,
    CRITICAL,
    SCHROEDER,
    SUBCRITICAL,
    ConvolutionPowers,
    OffspringDistribution,
    characterize,
    conjugate,
    generation_law,
    second_fixed_point,
    support,
)

SPEC_NAMES = (
    "ratio",
    "extinction",
    "sized_biased_extinct",
    "schroeder_unit",
    "boettcher_unit",
    "critical_size",
    "penalized_p",
    "two_index",
    "subcritical_penalized",
)


# ---------------------------------------------------------------- a_i^{(p)}(n) and G


@dataclass(frozen=True)
class GCoefficients:
    """``a_i^{(p)}(n)`` for ``i = 1..p`` (``values[i-1]``) at ``x = a / mu**n``."""

    p: int
    n: int
    a: object
    x: object
    phi_x: object
    values: tuple
    jet: tuple  # phi^{(k)}(x) / k!, k = 0..p

    def __getitem__(self, i: int):
        return self.values[i - 1]


def _point(q: OffspringDistribution, a, n: int):
    if a == 0 and is_exact(a):
        return Fraction(0)
    return float(a) / float(q.mean) ** n


def _supercritical(q: OffspringDistribution):
    if q.mean <= 1:
        raise DomainError("this object is defined for super-critical laws only")


def a_coeffs(q: OffspringDistribution, p: int, n: int, a=0) -> GCoefficients:
    """``a_i^{(p)}(n) = sum over S_{i,p} of prod_r phi^{(n_r)}(a/mu^n) / n_r!``.

    Equivalently the coefficient of ``X**p`` in ``P(X)**i`` with
    ``P(X) = sum_{k>=1} phi^{(k)}(a/mu^n) / k! X**k``.
    """
    _supercritical(q)
    if p < 1:
        raise DomainError("a_coeffs needs p >= 1")
    if a < 0:
        raise DomainError("a must be nonnegative")
    x = _point(q, a, n)
    jet = laplace_transform(q, p).jet(x, p).coeffs
    values = tuple(power_coefficients(list(jet), i, p)[p] for i in range(1, p + 1))
    return GCoefficients(p, n, a, x, jet[0], values, tuple(jet))


def a_table(q: OffspringDistribution, p: int, n: int, a=0) -> dict:
    """``{(s, l): a_s^{(l)}(n)}`` for ``1 <= s <= l <= p``."""
    table = {}
    for ell in range(1, p + 1):
        g = a_coeffs(q, ell, n, a)
        for s in range(1, ell + 1):
            table[(s, ell)] = g[s]
    return table


def phi_derivative(q: OffspringDistribution, p: int, x):
    """``phi^{(p)}(x)``."""
    return laplace_transform(q, p).jet(x, p).derivative(p)


def G_eval(q: OffspringDistribution, p: int, n: int, a, x: int, n0: int = 0, coeffs: GCoefficients | None = None):
    """``G_{n,n0}^{(p)}(x)``; ``n0 = 0`` gives the single-index ``G_n^{(p)}``."""
    _supercritical(q)
    if x < 0:
        raise DomainError("G is evaluated at population sizes x >= 0")
    if n < n0:
        raise DomainError("need n >= n0")
    x0 = _point(q, a, n0)
    if p == 0:
        L = laplace_transform(q, 0)
        return L.phi(_point(q, a, n)) ** x / L.phi(x0)
    g = coeffs if coeffs is not None else a_coeffs(q, p, n, a)
    norm = math.factorial(p) / phi_derivative(q, p, x0)
    total = 0
    for i in range(1, min(p, x) + 1):
        total = total + g[i] * hilbert(i, x) * g.phi_x ** (x - i)
    return norm * total


# ---------------------------------------------------------------- martingale specs


@dataclass
class MartingaleSpec:
    """A named martingale ``M_n = F(n, Z_n)``.

    ``fixed_point`` selects which root of ``f(s) = s`` the extinction-type
    martingales use: ``"smallest"`` (kappa in [0, 1]) or ``"second"`` (the
    root above 1 of a sub-critical law).
    """

    name: str
    q: OffspringDistribution
    p: int = 1
    a: object = 0
    n0: int = 0
    fixed_point: str = "smallest"
    _cache: dict = field(default_factory=dict, init=False, repr=False)
    _consts: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.name not in SPEC_NAMES:
            raise DomainError(f"unknown martingale {self.name!r}; choose from {', '.join(SPEC_NAMES)}")
        crit = characterize(self.q)
        self.crit = crit
        q, name = self.q, self.name
        if self.p < 0 or self.n0 < 0 or self.a < 0:
            raise DomainError("p, n0 and a must be nonnegative")
        if name != "two_index" and self.n0 != 0:
            raise DomainError("only two_index takes a starting height n0")
        if name in ("extinction", "sized_biased_extinct"):
            if self.fixed_point == "second":
                self._consts["kappa"] = second_fixed_point(q)
            elif self.fixed_point == "smallest":
                if name == "extinction" and crit.kappa == 0:
                    raise DomainError("extinction martingale is degenerate when kappa = 0")
                self._consts["kappa"] = crit.kappa
            else:
                raise DomainError(f"fixed_point must be 'smallest' or 'second', not {self.fixed_point!r}")
            kappa = self._consts["kappa"]
            self._consts["gamma"] = q.pgf_derivative(kappa, 1)
        elif name == "schroeder_unit":
            if q.probs[0] != 0 or q.probs[1] == 0:
                raise DomainError("schroeder_unit needs q_0 = 0 < q_1")
        elif name == "boettcher_unit":
            if crit.a_min < 2:
                raise DomainError("boettcher_unit needs a_min >= 2")
        elif name == "critical_size":
            if crit.regime != CRITICAL:
                raise DomainError("critical_size needs a critical law")
        elif name in ("penalized_p", "two_index"):
            _supercritical(q)
        elif name == "subcritical_penalized":
            if crit.regime != SUBCRITICAL:
                raise DomainError("subcritical_penalized needs a sub-critical law")
            self._consts["kappa"] = second_fixed_point(q)
            self._consts["qbar"] = conjugate(q)
        if self.laplace and not isinstance(self.a, (int, float, Fraction)):
            raise DomainError("a must be a real number")

    @property
    def laplace(self) -> bool:
        return self.name in ("penalized_p", "two_index", "subcritical_penalized")

    @property
    def exact(self) -> bool:
        """True when every value is a rational number."""
        if not self.q.exact:
            return False
        if self.laplace and not (self.a == 0 and is_exact(self.a)):
            return False
        if self.name == "extinction" or self.name == "sized_biased_extinct":
            return is_exact(self._consts["kappa"])
        if self.name == "subcritical_penalized":
            return is_exact(self._consts["kappa"]) and self._consts["qbar"].exact
        return True

    @property
    def start(self) -> int:
        return self.n0

    def label(self) -> str:
        parts = [self.name]
        if self.laplace:
            parts.append(f"p={self.p}")
            parts.append(f"a={self.a}")
        if self.name == "two_index":
            parts.append(f"n0={self.n0}")
        if self.fixed_point != "smallest":
            parts.append(f"fixed_point={self.fixed_point}")
        return ",".join(parts)

    def evaluate(self, n: int, z: int):
        if n < self.n0:
            raise DomainError(f"{self.name} starts at n0={self.n0}")
        if z < 0:
            raise DomainError("population sizes are nonnegative")
        key = (n, z)
        if key not in self._cache:
            self._cache[key] = self._evaluate(n, z)
        return self._cache[key]

    def _evaluate(self, n: int, z: int):
        q, name = self.q, self.name
        one = q.one
        if name == "ratio":
            return z * one / q.mean**n
        if name == "critical_size":
            return z * one
        if name == "extinction":
            return self._consts["kappa"] ** z / self._consts["kappa"]
        if name == "sized_biased_extinct":
            kappa, gamma = self._consts["kappa"], self._consts["gamma"]
            if z == 0:
                return 0 * one
            return z * kappa ** (z - 1) / gamma**n
        if name == "schroeder_unit":
            return q.probs[1] ** -n if z == 1 else 0 * one
        if name == "boettcher_unit":
            a = q.a_min
            if z != a**n:
                return 0 * one
            return q.probs[a] ** -((a**n - 1) // (a - 1))
        if name == "penalized_p":
            return G_eval(q, self.p, n, self.a, z) / q.mean ** (self.p * n)
        if name == "two_index":
            return G_eval(q, self.p, n, self.a, z, self.n0) / q.mean ** (self.p * (n - self.n0))
        if name == "subcritical_penalized":
            kappa, qbar = self._consts["kappa"], self._consts["qbar"]
            if not self.exact:
                kappa = float(kappa)
            g = G_eval(qbar, self.p, n, self.a, z)
            return kappa ** z / kappa * g / qbar.mean ** (self.p * n)
        raise AssertionError(name)


def evaluate(M: MartingaleSpec, n: int, z: int):
    return M.evaluate(n, z)


def applicable_specs(q: OffspringDistribution, laplace_a=(0, 0.5, 1), p_values=(0, 1, 2)) -> list:
    """Every martingale family whose hypotheses ``q`` satisfies."""
    crit = characterize(q)
    out = [MartingaleSpec("ratio", q)]
    if crit.regime in (SCHROEDER, BOETTCHER) and 0 < crit.kappa < 1:
        out.append(MartingaleSpec("extinction", q))
        out.append(MartingaleSpec("sized_biased_extinct", q))
    if crit.regime == SUBCRITICAL and q.K >= 2:
        out.append(MartingaleSpec("extinction", q, fixed_point="second"))
        out.append(MartingaleSpec("sized_biased_extinct", q, fixed_point="second"))
        for p in p_values:
            for a in laplace_a:
                out.append(MartingaleSpec("subcritical_penalized", q, p=p, a=a))
    if q.probs[0] == 0 and q.probs[1] != 0:
        out.append(MartingaleSpec("schroeder_unit", q))
    if crit.a_min >= 2:
        out.append(MartingaleSpec("boettcher_unit", q))
    if crit.regime == CRITICAL:
        out.append(MartingaleSpec("critical_size", q))
    if crit.regime in (SCHROEDER, BOETTCHER):
        for p in p_values:
            for a in laplace_a:
                out.append(MartingaleSpec("penalized_p", q, p=p, a=a))
        for a in laplace_a:
            out.append(MartingaleSpec("two_index", q, p=2, a=a, n0=1))
    return out


# ---------------------------------------------------------------- verification


@dataclass
class MartingaleReport:
    spec: str
    exact: bool
    n_max: int
    checked: int = 0
    violations: list = field(default_factory=list)  # (n, z, lhs, rhs)
    means: list = field(default_factory=list)  # (n, E[M_n])
    max_rel_gap: float = 0.0
    tol: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        def num(x):
            return str(x) if isinstance(x, Fraction) else float(x)

        return {
            "spec": self.spec,
            "exact": self.exact,
            "n_max": self.n_max,
            "checked": self.checked,
            "passed": self.passed,
            "max_rel_gap": self.max_rel_gap,
            "tol": self.tol,
            "violations": [
                {"n": n, "z": z, "lhs": num(lhs), "rhs": num(rhs)} for n, z, lhs, rhs in self.violations
            ],
            "means": [{"n": n, "mean": num(m)} for n, m in self.means],
        }


def _agree(lhs, rhs, exact: bool, tol: float):
    if exact:
        return lhs == rhs, 0.0 if lhs == rhs else math.inf
    gap = abs(float(lhs) - float(rhs)) / max(abs(float(rhs)), 1e-300)
    if float(rhs) == 0:
        gap = abs(float(lhs))
    return gap <= tol, gap


def verify_martingale(M, q: OffspringDistribution | None = None, n_max: int = 4, tol: float = 1e-9) -> MartingaleReport:
    """Check ``E[M_{n+1} | Z_n = z] = M_n(z)`` for reachable ``z``, ``n0 <= n < n_max``.

    ``M`` is any object with ``evaluate(n, z)``, ``q``, ``start`` and
    ``exact``.  Also checks ``E[M_n] = 1`` for ``n0 <= n <= n_max``.
    """
    q = q if q is not None else M.q
    exact = bool(M.exact) and q.exact
    name = M.label() if hasattr(M, "label") else getattr(M, "name", "custom")
    report = MartingaleReport(name, exact, n_max, tol=0.0 if exact else tol)
    powers = ConvolutionPowers(q)
    start = M.start
    for n in range(start, n_max + 1):
        law = generation_law(q, n - start)
        mean = sum(w * M.evaluate(n, z) for z, w in enumerate(law) if w)
        report.means.append((n, mean))
        ok, gap = _agree(mean, q.one, exact, tol)
        report.max_rel_gap = max(report.max_rel_gap, gap)
        if not ok:
            report.violations.append((n, "mean", mean, q.one))
        if n == n_max:
            break
        for z in support(law):
            step = powers[z]
            lhs = sum(w * M.evaluate(n + 1, y) for y, w in enumerate(step) if w)
            rhs = M.evaluate(n, z)
            ok, gap = _agree(lhs, rhs, exact, tol)
            report.max_rel_gap = max(report.max_rel_gap, gap)
            report.checked += 1
            if not ok:
                report.violations.append((n, z, lhs, rhs))
    return report


# ---------------------------------------------------------------- uniqueness system


@dataclass
class UniquenessResult:
    p: int
    F: list
    M: list
    C: list
    det_F: Fraction
    constructive: list  # same layout as C
    triangular: bool
    matches: bool

    def polynomial(self, k: int) -> list:
        """Coefficients of ``P_k`` in the Hilbert basis ``H_1..H_k``."""
        return [self.C[i][k - 1] for i in range(k)]


def constructive_coefficients(q: OffspringDistribution, p: int) -> list:
    """Matrix of ``k! a_i^{(k)}(0) / phi^{(k)}(0)``: the mean-one ``a = 0`` solution."""
    C = [[Fraction(0)] * p for _ in range(p)]
    for k in range(1, p + 1):
        g = a_coeffs(q, k, 0, 0)
        norm = math.factorial(k) / phi_derivative(q, k, Fraction(0))
        for i in range(1, k + 1):
            C[i - 1][k - 1] = norm * g[i]
    return C


def uniqueness_solve(q: OffspringDistribution, p: int) -> UniquenessResult:
    """Solve ``F C = M`` exactly for the Hilbert-basis coefficients of ``P_1..P_p``.

    ``F[i][j] = f_{i-1}^{(j)}(1) / j! = E[H_j(Z_{i-1})]``,
    ``M[i][j] = mu**((i-1) j)``; column ``k`` of ``C`` holds ``c_1^{(k)}..c_k^{(k)}``.
    """
    _supercritical(q)
    if not q.exact:
        raise DomainError("uniqueness_solve runs in exact mode")
    if p < 1:
        raise DomainError("p must be at least 1")
    mu = q.mean
    F = []
    for i in range(1, p + 1):
        jet = iterate_jet(q, i - 1, Fraction(1), p)
        F.append([jet.coeffs[j] for j in range(1, p + 1)])
    M = [[mu ** ((i - 1) * j) for j in range(1, p + 1)] for i in range(1, p + 1)]
    det_F = _linalg.det(F)
    if det_F == 0:
        raise VerificationError("F is singular", report={"F": F})
    C = _linalg.solve(F, M)
    triangular = all(C[i][j] == 0 for i in range(p) for j in range(p) if i > j)
    constructive = constructive_coefficients(q, p)
    matches = C == constructive
    return UniquenessResult(p, F, M, C, det_F, constructive, triangular, matches)
