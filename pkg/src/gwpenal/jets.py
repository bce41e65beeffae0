"""Truncated Taylor expansions ("jets") and their composition.

A :class:`TaylorJet` at base point ``s`` stores ``c_j = g^{(j)}(s) / j!``
for ``j = 0..order``.  Composition of jets is the chain rule to all orders
(Faa di Bruno), done here by Horner's scheme on the inner jet's increment.
Iterating :func:`compose` with the jet of the offspring generating function
gives every derivative of ``f_n`` at ``s`` in ``O(n * order**3)`` work.

In float mode a step whose coefficients drop below
:data:`~gwpenal.numbers.UNDERFLOW_THRESHOLD` is redone with
:class:`~gwpenal.numbers.LogNum` coefficients, and the iteration stays in log
space from then on.  In exact mode rationals are capped in bit length.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

from .errors import DomainError
from .numbers import DEFAULT_BIT_CAP, LogNum, check_bits, is_exact, needs_log_space, one_like, zero_like


@dataclass(frozen=True)
class TaylorJet:
    base_point: object
    coeffs: tuple

    def __post_init__(self):
        if len(self.coeffs) < 1:
            raise DomainError("a jet needs at least one coefficient")

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def value(self):
        return self.coeffs[0]

    def derivative(self, j: int):
        """``g^{(j)}(s) = j! * c_j``."""
        return self.coeffs[j] * math.factorial(j)

    def derivatives(self) -> list:
        return [self.derivative(j) for j in range(self.order + 1)]

    def to_log(self) -> "TaylorJet":
        return TaylorJet(LogNum.of(self.base_point), tuple(LogNum.of(c) for c in self.coeffs))

    def scaled(self, factor) -> "TaylorJet":
        """Jet of ``h -> g(s + factor * h)``: coefficient j picks up ``factor**j``."""
        out = []
        mult = one_like(self.coeffs[0])
        for c in self.coeffs:
            out.append(c * mult)
            mult = mult * factor
        return TaylorJet(self.base_point, tuple(out))


def identity_jet(s, order: int) -> TaylorJet:
    one, zero = one_like(s), zero_like(s)
    coeffs = [s]
    if order >= 1:
        coeffs.append(one)
    coeffs.extend([zero] * (order - 1))
    return TaylorJet(s, tuple(coeffs[: order + 1]))


def jet_of_f(q, x, order: int) -> TaylorJet:
    """Jet of the offspring generating function at ``x``.

    ``c_j = sum_k q_k C(k, j) x**(k-j)``, accumulated by Horner's rule.
    """
    if order < 0:
        raise DomainError("order must be nonnegative")
    probs = q.probs
    coeffs = []
    for j in range(order + 1):
        acc = None
        for k in range(len(probs) - 1, j - 1, -1):
            c = probs[k] * math.comb(k, j)
            acc = c * one_like(x) if acc is None else acc * x + c
        coeffs.append(zero_like(x) if acc is None else acc)
    return TaylorJet(x, tuple(coeffs))


def _close(a, b) -> bool:
    if is_exact(a) and is_exact(b):
        return a == b
    if isinstance(a, LogNum) or isinstance(b, LogNum):
        a, b = LogNum.of(a), LogNum.of(b)
        if a.sign != b.sign:
            return False
        return a.sign == 0 or abs(a.log - b.log) <= 1e-12
    fa, fb = float(a), float(b)
    return abs(fa - fb) <= 1e-12 * max(1.0, abs(fa), abs(fb))


def compose(outer: TaylorJet, inner: TaylorJet) -> TaylorJet:
    """Jet of ``outer o inner`` at ``inner.base_point``.

    ``outer`` must be expanded at the value of ``inner``.
    """
    if outer.order != inner.order:
        raise DomainError(f"order mismatch: {outer.order} vs {inner.order}")
    if not _close(outer.base_point, inner.value):
        raise DomainError(
            f"outer jet expanded at {outer.base_point!r}, inner jet value is {inner.value!r}"
        )
    p = inner.order
    zero = zero_like(inner.value) if not isinstance(outer.coeffs[0], LogNum) else LogNum(0, 0.0)
    delta = [zero] + list(inner.coeffs[1:])
    # Horner: result = F_p; result = result * delta + F_i for i = p-1..0
    result = [outer.coeffs[p]] + [zero] * p
    for i in range(p - 1, -1, -1):
        prod = [zero] * (p + 1)
        for a_deg in range(p + 1):
            a = result[a_deg]
            if not a:
                continue
            for b_deg in range(1, p + 1 - a_deg):
                b = delta[b_deg]
                if b:
                    prod[a_deg + b_deg] = prod[a_deg + b_deg] + a * b
        prod[0] = prod[0] + outer.coeffs[i]
        result = prod
    return TaylorJet(inner.base_point, tuple(result))


def iterate_jets(
    q,
    n: int,
    s,
    order: int,
    *,
    bit_cap: int = DEFAULT_BIT_CAP,
    log_space: str = "auto",
) -> Iterator[TaylorJet]:
    """Yield the jets of ``f_0, f_1, ..., f_n`` at ``s``.

    ``log_space`` is ``"auto"`` (switch on underflow), ``"always"`` or
    ``"never"``.
    """
    if n < 0:
        raise DomainError("n must be nonnegative")
    if not q.exact and is_exact(s):
        s = float(s)
    jet = identity_jet(s, order)
    if log_space == "always":
        jet = jet.to_log()
    yield jet
    for _ in range(n):
        nxt = compose(jet_of_f(q, jet.value, order), jet)
        if is_exact(nxt.value):
            check_bits(nxt.coeffs, bit_cap)
        elif log_space == "auto" and not isinstance(nxt.value, LogNum) and needs_log_space(nxt.coeffs, jet.coeffs):
            jet = jet.to_log()
            nxt = compose(jet_of_f(q, jet.value, order), jet)
        jet = nxt
        yield jet


def iterate_jet(q, n: int, s, order: int, **kwargs) -> TaylorJet:
    """Jet of ``f_n`` at ``s``; ``f_n^{(p)}(s) = p! * coeffs[p]``."""
    jet = None
    for jet in iterate_jets(q, n, s, order, **kwargs):
        pass
    return jet


@dataclass(frozen=True)
class LaplaceJet:
    """Jet in ``y`` of ``h_j(y) = f_j(c * exp(-y))`` plus its complement ``c - h_j``.

    ``c`` is a fixed point of ``f`` (1, or the root above 1 of a sub-critical
    law).  Near ``y = 0`` the value is within rounding of ``c``; carrying
    ``c - value`` separately keeps full relative precision there.
    """

    jet: TaylorJet
    complement: object
    base: object


def _next_complement(q, u, base):
    """``(c - f(c (1 - u))) / c`` computed without cancellation, for ``f(c) = c``."""
    if is_exact(u) and is_exact(base):
        return (base - q.pgf(base * (1 - u))) / base
    total = 0.0
    log1m = math.log1p(-float(u))
    for k, p in enumerate(q.probs):
        if k and p:
            total += float(p) * float(base) ** (k - 1) * -math.expm1(k * log1m)
    return total


def laplace_jets(q, m: int, x, order: int, base=1) -> Iterator[LaplaceJet]:
    """Yield the ``y``-jets of ``h_0..h_m`` at ``y = x``.

    ``h_0(y) = c exp(-y)`` and ``h_{j+1} = f o h_j``; ``h_m`` is ``c`` times
    the Laplace transform of ``Z_m`` under the law tilted by ``c``.
    """
    if x < 0:
        raise DomainError("x must be nonnegative")
    exact = is_exact(x) and x == 0 and is_exact(base) and q.exact
    if exact:
        coeffs = [base * Fraction((-1) ** j, math.factorial(j)) for j in range(order + 1)]
        u = Fraction(0)
    else:
        x, c = float(x), float(base)
        e = math.exp(-x)
        coeffs = [c * e * (-1) ** j / math.factorial(j) for j in range(order + 1)]
        u = -math.expm1(-x)
    jet = TaylorJet(x, tuple(coeffs))
    yield LaplaceJet(jet, base * u, base)
    for _ in range(m):
        u = _next_complement(q, u, base)
        outer = jet_of_f(q, jet.value, order)
        value = base * (1 - u)
        nxt = compose(outer, jet)
        jet = TaylorJet(nxt.base_point, (value,) + nxt.coeffs[1:])
        yield LaplaceJet(jet, base * u, base)
