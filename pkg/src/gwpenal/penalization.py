"""Penalization ratios ``E[1_A w(Z_{n+m})] / E[w(Z_{n+m})]`` and their limits.

Two weight families are supported:

``poly_geometric(p, s)``
    ``H_p(x) s**(x - p)``; the ``s**-p`` factor cancels in every ratio and
    keeps the weight non-degenerate at ``s = 0``.
``poly_laplace(p, a)``
    ``H_p(x) exp(-a x / mu**(n+m))`` for super-critical laws, and
    ``H_p(x) kappa**x exp(-a x / f'(kappa)**(n+m))`` for sub-critical laws
    with a fixed point ``kappa > 1``.

Conditioning on ``Z_n = z`` reduces everything to jets of ``f_m``.  Geometric
weights use jets in ``s``; Laplace weights use jets in the Laplace variable
(see :func:`gwpenal.jets.laplace_jets`) so that ``exp(-a / mu**(n+m))`` never
has to be rounded to a float near 1.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .combinatorics import hilbert, power_coefficients
from .errors import DomainError, ExactSizeError
from .jets import compose, iterate_jet, laplace_jets, TaylorJet
from .martingales import MartingaleSpec
from .numbers import LogNum, is_exact
from .offspring import (
    BOETTCHER,
    CRITICAL,
    SCHROEDER,
    SUBCRITICAL,
    OffspringDistribution,
    characterize,
    conjugate,
    generation_law,
    second_fixed_point,
)
from .trees import enumerate_trees, generation_size, gw_probability

log = logging.getLogger(__name__)

DEFAULT_LIMIT_TOL = 1e-6
ERROR_FLOOR = 1e-13


# ---------------------------------------------------------------- events


@dataclass(frozen=True)
class EventSpec:
    """An event measurable with respect to the first ``n`` generations.

    ``kind`` is one of ``all``, ``z_equals``, ``z_in``, ``z_at_most`` or
    ``tree_event``; tree events carry a predicate over the restricted tree
    and are evaluated by exhaustive enumeration.
    """

    kind: str
    value: object = None
    predicate: Callable | None = field(default=None, compare=False)
    description: str = ""

    def __post_init__(self):
        if self.kind not in ("all", "z_equals", "z_in", "z_at_most", "tree_event"):
            raise DomainError(f"unknown event kind {self.kind!r}")
        if self.kind == "tree_event" and self.predicate is None:
            raise DomainError("tree_event needs a predicate")

    @property
    def on_trees(self) -> bool:
        return self.kind == "tree_event"

    def contains(self, z: int) -> bool:
        if self.kind == "all":
            return True
        if self.kind == "z_equals":
            return z == self.value
        if self.kind == "z_in":
            return z in self.value
        if self.kind == "z_at_most":
            return z <= self.value
        raise DomainError("tree events are not functions of Z_n alone")

    def __str__(self):
        if self.kind == "all":
            return "all"
        if self.kind == "z_equals":
            return f"z_eq:{self.value}"
        if self.kind == "z_in":
            return "z_in:" + ",".join(str(v) for v in sorted(self.value))
        if self.kind == "z_at_most":
            return f"z_le:{self.value}"
        return f"tree:{self.description}"


def everything() -> EventSpec:
    return EventSpec("all")


def z_equals(k: int) -> EventSpec:
    return EventSpec("z_equals", int(k))


def z_in(values) -> EventSpec:
    return EventSpec("z_in", frozenset(int(v) for v in values))


def z_at_most(k: int) -> EventSpec:
    return EventSpec("z_at_most", int(k))


def tree_event(predicate: Callable, description: str = "custom") -> EventSpec:
    return EventSpec("tree_event", None, predicate, description)


def parse_event(text: str) -> EventSpec:
    """Parse ``all``, ``z_eq:K``, ``z_in:K1,K2,...`` or ``z_le:K``."""
    text = text.strip()
    if text == "all":
        return everything()
    kind, _, arg = text.partition(":")
    try:
        if kind == "z_eq":
            return z_equals(int(arg))
        if kind == "z_in":
            return z_in(int(v) for v in arg.split(",") if v.strip())
        if kind == "z_le":
            return z_at_most(int(arg))
    except ValueError as exc:
        raise DomainError(f"malformed event {text!r}") from exc
    raise DomainError(f"unknown event {text!r}; use all, z_eq:K, z_in:K1,K2 or z_le:K")


# ---------------------------------------------------------------- weights


@dataclass(frozen=True)
class Weight:
    """Penalization weight.

    ``alpha`` optionally replaces ``H_p`` by ``sum_k alpha[k-1] H_k`` (a
    degree-``p`` polynomial vanishing at 0).
    """

    kind: str
    p: int
    s: object = None
    a: object = None
    alpha: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("poly_geometric", "poly_laplace"):
            raise DomainError(f"unknown weight kind {self.kind!r}")
        if self.p < 0:
            raise DomainError("p must be nonnegative")
        if self.kind == "poly_geometric" and (self.s is None or self.s < 0):
            raise DomainError("geometric weight needs s >= 0")
        if self.kind == "poly_laplace" and (self.a is None or self.a < 0):
            raise DomainError("Laplace weight needs a >= 0")
        if self.alpha is not None:
            if len(self.alpha) != self.p or self.p == 0 or self.alpha[-1] == 0:
                raise DomainError("alpha must give a degree-p polynomial with p >= 1")

    @property
    def geometric(self) -> bool:
        return self.kind == "poly_geometric"

    def __str__(self):
        if self.geometric:
            return f"geom:p={self.p},s={self.s}"
        return f"laplace:p={self.p},a={self.a}"


def poly_geometric(p: int, s, alpha=None) -> Weight:
    return Weight("poly_geometric", p, s=s, alpha=None if alpha is None else tuple(alpha))


def poly_laplace(p: int, a, alpha=None) -> Weight:
    return Weight("poly_laplace", p, a=a, alpha=None if alpha is None else tuple(alpha))


def _number(text: str):
    text = text.strip()
    if "/" in text or text.lstrip("-").isdigit():
        return Fraction(text)
    return float(text)


def parse_weight(text: str) -> Weight:
    """Parse ``geom:p=1,s=0.5`` or ``laplace:p=2,a=1.0`` (rationals like ``1/2`` stay exact)."""
    kind, _, rest = text.partition(":")
    params = {}
    for item in rest.split(","):
        if item.strip():
            key, _, val = item.partition("=")
            params[key.strip()] = val
    try:
        p = int(params.get("p", "1"))
        if kind == "geom":
            return poly_geometric(p, _number(params["s"]))
        if kind == "laplace":
            return poly_laplace(p, _number(params["a"]))
    except (KeyError, ValueError) as exc:
        raise DomainError(f"malformed weight {text!r}") from exc
    raise DomainError(f"unknown weight {text!r}; use geom:p=..,s=.. or laplace:p=..,a=..")


def stirling2(j: int, k: int) -> int:
    """Stirling numbers of the second kind."""
    return sum((-1) ** (k - i) * math.comb(k, i) * i**j for i in range(k + 1)) // math.factorial(k)


def monomial_to_hilbert(coeffs) -> list:
    """``sum_j coeffs[j] x**j`` (``coeffs[0]`` must be 0) in the basis ``H_1..H_d``."""
    if coeffs and coeffs[0] != 0:
        raise DomainError("the polynomial must vanish at 0")
    d = len(coeffs) - 1
    return [sum(coeffs[j] * stirling2(j, k) * math.factorial(k) for j in range(k, d + 1)) for k in range(1, d + 1)]


def hilbert_to_monomial(alpha) -> list:
    """Monomial coefficients (constant first) of ``sum_k alpha[k-1] H_k``."""
    d = len(alpha)
    out = [Fraction(0)] * (d + 1)
    for k, c in enumerate(alpha, start=1):
        poly = [Fraction(1)]
        for r in range(k):
            # multiply by (x - r)
            poly = [(-r) * poly[0]] + [poly[i - 1] - r * poly[i] for i in range(1, len(poly))] + [poly[-1]]
        for j, v in enumerate(poly):
            out[j] += c * v / math.factorial(k)
    return out


# ---------------------------------------------------------------- conditional weights


def conditional_weight(q: OffspringDistribution, p: int, s, z: int, m: int, jet: TaylorJet | None = None):
    """``E[H_p(Z_{n+m}) s**(Z_{n+m} - p) | Z_n = z]``.

    ``p = 0`` gives ``f_m(s)**z``; otherwise the sum over ``i`` of
    ``H_i(z) f_m(s)**(z-i)`` times the composition sums of the jet of ``f_m``.
    """
    if jet is None:
        jet = iterate_jet(q, m, s, p)
    return _hilbert_weights(jet, p, z)[p]


def _hilbert_weights(jet: TaylorJet, p: int, z: int) -> list:
    """``[W_0(z), ..., W_p(z)]`` with ``W_k(z) = E[H_k(Z') s**(Z'-k) | z]``."""
    coeffs = list(jet.coeffs)
    fm = coeffs[0]
    out = [fm**z]
    if p == 0:
        return out
    powers = [None] + [power_coefficients(coeffs, i, p) for i in range(1, min(p, z) + 1)]
    for k in range(1, p + 1):
        total = 0 * fm
        for i in range(1, min(k, z) + 1):
            total = total + hilbert(i, z) * fm ** (z - i) * powers[i][k]
        out.append(total)
    return out


def _laplace_weight(jet: TaylorJet, z: int, monomial) -> object:
    """``E[P(Z') c**Z' exp(-x Z') | z]`` from the ``y``-jet of ``h_m`` at ``x``."""
    order = jet.order
    h0 = jet.coeffs[0]
    one = h0 * 0 + 1
    power = TaylorJet(h0, tuple(math.comb(z, j) * h0 ** (z - j) if j <= z else 0 * one for j in range(order + 1)))
    psi = compose(power, jet).coeffs
    total = 0 * one
    for k, b in enumerate(monomial):
        if b:
            total = total + b * (-1) ** k * math.factorial(k) * psi[k]
    return total


# ---------------------------------------------------------------- problems


@dataclass
class PenalizationProblem:
    q: OffspringDistribution
    weight: Weight
    event: EventSpec
    n: int
    m_schedule: tuple | None = None

    def __post_init__(self):
        if self.n < 0:
            raise DomainError("n must be nonnegative")
        self.crit = characterize(self.q)
        self._law = None
        self._mass = None
        self._kappa_high = None
        w = self.weight
        if w.geometric:
            limit_s = self.s_max()
            if not (w.s < limit_s or (self.crit.regime == CRITICAL and w.s == 1)):
                raise DomainError(f"geometric weight needs s < {limit_s} for a {self.crit.regime} law")
            if w.alpha is not None and w.s == 0:
                raise DomainError("custom polynomial weights need s > 0")
        else:
            if self.crit.regime == CRITICAL:
                raise DomainError("no Laplace-weight limit theorem covers critical laws")
            if self.crit.regime == SUBCRITICAL:
                self._kappa_high = second_fixed_point(self.q)

    def s_max(self):
        if self.crit.regime == SUBCRITICAL and self.q.K >= 2:
            return second_fixed_point(self.q)
        return 1

    @property
    def law(self) -> list:
        if self._law is None:
            self._law = generation_law(self.q, self.n)
        return self._law

    def event_mass(self) -> dict:
        """``{z: P(Z_n = z, event)}``."""
        if self._mass is None:
            if self.event.on_trees:
                mass = {}
                for t in enumerate_trees(self.n, self.q.K):
                    if self.event.predicate(t):
                        z = generation_size(t, self.n)
                        mass[z] = mass.get(z, 0 * self.q.one) + gw_probability(self.q, t, self.n)
                self._mass = mass
            else:
                self._mass = {z: w for z, w in enumerate(self.law) if w and self.event.contains(z)}
        return self._mass

    def weights(self, m: int, force_float: bool = False) -> dict:
        """``{z: E[w(Z_{n+m}) | Z_n = z]}`` over the support of ``Z_n`` (up to a common factor)."""
        q, w = self.q, self.weight
        zs = [z for z, mass in enumerate(self.law) if mass]
        if w.geometric:
            s = w.s if (q.exact and is_exact(w.s) and not force_float) else float(w.s)
            jet = iterate_jet(q, m, s, w.p)
            if _weights_underflow(jet, max(zs)):
                jet = jet.to_log()
            out = {}
            for z in zs:
                hw = _hilbert_weights(jet, w.p, z)
                if w.alpha is None:
                    out[z] = hw[w.p]
                else:
                    out[z] = sum(c * s**k * hw[k] for k, c in enumerate(w.alpha, start=1))
            return out
        if self.crit.regime == SUBCRITICAL:
            base = self._kappa_high
            rate = q.pgf_derivative(base, 1)
        else:
            base, rate = q.one, q.mean
        exact = q.exact and w.a == 0 and is_exact(w.a) and is_exact(base) and not force_float
        x = Fraction(0) if exact else float(w.a) / float(rate) ** (self.n + m)
        if not exact:
            base = float(base)
        last = None
        for last in laplace_jets(q, m, x, w.p, base=base):
            pass
        alpha = w.alpha if w.alpha is not None else tuple([0] * (w.p - 1) + [1]) if w.p else ()
        monomial = hilbert_to_monomial(alpha) if w.p else [Fraction(1)]
        if not exact:
            monomial = [float(c) for c in monomial]
        return {z: _laplace_weight(last.jet, z, monomial) for z in zs}


def _weights_underflow(jet: TaylorJet, z_max: int) -> bool:
    """True when float weights ``f_m(s)**z`` would lose magnitude below ~1e-280."""
    if not all(isinstance(c, float) for c in jet.coeffs):
        return False
    fm = jet.coeffs[0]
    return 0 < fm < 1 and z_max * -math.log(fm) > 640


def _to_log_if_needed(values):
    if any(isinstance(v, LogNum) for v in values):
        return [LogNum.of(v) for v in values]
    return list(values)


def _sums(problem: PenalizationProblem, m: int, limit=None, force_float: bool = False):
    W = problem.weights(m, force_float)
    mass = problem.event_mass()
    law = problem.law
    zs = sorted(W)
    terms_w = _to_log_if_needed([W[z] for z in zs])
    log_mode = bool(terms_w) and isinstance(terms_w[0], LogNum)

    def conv(x):
        return LogNum.of(x) if log_mode else x

    num = conv(0)
    den = conv(0)
    err = conv(0)
    for z, wz in zip(zs, terms_w):
        pz = conv(law[z])
        ez = conv(mass.get(z, 0))
        den = den + pz * wz
        num = num + ez * wz
        if limit is not None:
            err = err + wz * (ez - conv(limit if not log_mode else float(limit)) * pz)
    return num, den, err


def ratio(problem: PenalizationProblem, m: int):
    """The penalization ratio at horizon ``n + m``; exact when inputs allow."""
    num, den, _ = _sums(problem, m)
    if not den:
        raise DomainError("the weight vanishes almost surely; the ratio is undefined")
    r = num / den
    return float(r) if isinstance(r, LogNum) else r


def ratio_error(problem: PenalizationProblem, m: int, limit) -> tuple:
    """``(ratio(m), |ratio(m) - limit|, log|ratio(m) - limit|)``.

    The error is summed term by term, never as a difference of two nearly
    equal ratios; its log stays finite when the float value underflows.
    """
    if not problem.q.exact or not is_exact(limit):
        limit = float(limit)
    try:
        num, den, err = _sums(problem, m, limit)
    except ExactSizeError:
        log.info("exact weights at m=%d exceed the bit cap; using floats", m)
        num, den, err = _sums(problem, m, float(limit), force_float=True)
    if not den:
        raise DomainError("the weight vanishes almost surely; the ratio is undefined")
    r = num / den
    e = abs(err / den)
    if isinstance(e, LogNum):
        log_e = e.log
    else:
        log_e = math.log(e) if e else -math.inf
    return (float(r) if isinstance(r, LogNum) else r), (float(e) if isinstance(e, LogNum) else e), log_e


# ---------------------------------------------------------------- limits


@dataclass
class LimitResult:
    limit: object
    martingale: MartingaleSpec
    theorem: str
    table: list  # (m, ratio, error)
    converged: bool
    tol: float
    log_errors: list = field(default_factory=list)

    def errors(self) -> list:
        return [float(e) for _, _, e in self.table]

    def decay_ratios(self, m_from: int | None = None) -> list:
        rows = [(m, float(e)) for m, _, e in self.table if m_from is None or m >= m_from]
        return [b / a for (_, a), (_, b) in zip(rows, rows[1:]) if a > 0 and b > 0]

    def log_slopes(self) -> list:
        """``log e_{k+1} / log e_k`` along the table (errors below 1 only)."""
        logs = self.log_errors
        return [b / a for a, b in zip(logs, logs[1:]) if -math.inf < a < 0 and -math.inf < b < 0]


def select_martingale(problem: PenalizationProblem) -> tuple:
    """``(MartingaleSpec, theorem label)`` describing the limit of ``problem``."""
    q, w, crit = problem.q, problem.weight, problem.crit
    if w.geometric:
        if crit.regime == SUBCRITICAL:
            label = "geometric/subcritical" if w.s < 1 else "geometric/subcritical-conjugate"
            if w.p == 0:
                return MartingaleSpec("extinction", q), label
            return MartingaleSpec("sized_biased_extinct", q), label
        if crit.regime == CRITICAL:
            if w.p == 0:
                return MartingaleSpec("extinction", q), "geometric/critical"
            return MartingaleSpec("critical_size", q), "geometric/critical"
        if crit.kappa > 0:
            if w.p == 0:
                return MartingaleSpec("extinction", q), "geometric/supercritical-kappa-positive"
            return MartingaleSpec("sized_biased_extinct", q), "geometric/supercritical-kappa-positive"
        if w.s == 0:
            raise DomainError("with q_0 = 0 the geometric weight needs s in (0, 1)")
        if crit.a_min == 1:
            return MartingaleSpec("schroeder_unit", q), "geometric/supercritical-a_min-1"
        return MartingaleSpec("boettcher_unit", q), "geometric/supercritical-a_min-2"
    if crit.regime == SUBCRITICAL:
        return MartingaleSpec("subcritical_penalized", q, p=w.p, a=w.a), "laplace/subcritical-conjugate"
    return MartingaleSpec("penalized_p", q, p=w.p, a=w.a), "laplace/supercritical"


def default_schedule(problem: PenalizationProblem) -> tuple:
    if problem.weight.geometric and problem.crit.regime == BOETTCHER:
        return tuple(range(2, 9))
    if problem.weight.geometric and problem.crit.regime == CRITICAL:
        return tuple(range(10, 201, 10))
    return tuple(range(5, 61, 5))


def limit_value(problem: PenalizationProblem, M: MartingaleSpec | None = None):
    """``E[M_n 1_event]`` for the selected limit martingale."""
    if M is None:
        M, _ = select_martingale(problem)
    total = 0 * problem.q.one
    for z, mass in problem.event_mass().items():
        total = total + mass * M.evaluate(problem.n, z)
    return total


def _decreasing(errors: list, window: int = 5) -> bool:
    tail = errors[-window:]
    for a, b in zip(tail, tail[1:]):
        if b > a and b > ERROR_FLOOR:
            return False
    return True


def limit_ratio(problem: PenalizationProblem, m_schedule=None, tol: float = DEFAULT_LIMIT_TOL) -> LimitResult:
    """Limit martingale, its value ``E[M_n 1_event]`` and the convergence table.

    Converged means the last error is within ``tol`` and the errors do not
    increase over the last five entries (errors below the rounding floor
    count as zero).
    """
    M, label = select_martingale(problem)
    L = limit_value(problem, M)
    schedule = m_schedule or problem.m_schedule or default_schedule(problem)
    table, logs = [], []
    for m in schedule:
        r, e, log_e = ratio_error(problem, m, L)
        table.append((m, r, e))
        logs.append(log_e)
    errors = [float(e) for _, _, e in table]
    converged = bool(errors) and errors[-1] <= tol and _decreasing(errors)
    return LimitResult(L, M, label, table, converged, tol, logs)


# ---------------------------------------------------------------- conjugation bridge


@dataclass
class DensityReport:
    n: int
    trees_checked: int
    max_gap: object
    exact: bool
    functional_lhs: object = None
    functional_rhs: object = None

    @property
    def passed(self) -> bool:
        ok = self.max_gap == 0 if self.exact else self.max_gap <= 1e-12
        if self.functional_lhs is not None:
            if self.exact:
                ok = ok and self.functional_lhs == self.functional_rhs
            else:
                ok = ok and abs(self.functional_lhs - self.functional_rhs) <= 1e-12
        return ok


def density_check(q: OffspringDistribution, n: int, functional: Callable | None = None) -> DensityReport:
    """Check ``P_bar(t) = kappa**(z_n(t) - 1) P(t)`` on every tree of height ``<= n``.

    ``q`` is sub-critical with a fixed point ``kappa > 1``; ``P_bar`` is the
    law of the conjugate tree.  With ``functional`` also compares
    ``E_bar[functional]`` with ``E[kappa**(Z_n - 1) functional]``.
    """
    crit = characterize(q)
    if crit.regime != SUBCRITICAL:
        raise DomainError("the density bridge starts from a sub-critical law")
    kappa = second_fixed_point(q)
    qbar = conjugate(q)
    exact = q.exact and qbar.exact and is_exact(kappa)
    max_gap = 0 if exact else 0.0
    count = 0
    lhs = rhs = 0
    K = max(q.K, qbar.K)
    for t in enumerate_trees(n, K):
        pbar = gw_probability(qbar, t, n)
        p = gw_probability(q, t, n)
        tilted = kappa ** generation_size(t, n) / kappa * p
        gap = abs(pbar - tilted)
        max_gap = max(max_gap, gap)
        count += 1
        if functional is not None:
            v = functional(t)
            lhs += pbar * v
            rhs += tilted * v
    return DensityReport(n, count, max_gap, exact, lhs if functional else None, rhs if functional else None)
