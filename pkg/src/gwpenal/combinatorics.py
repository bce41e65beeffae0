"""Hilbert polynomials, integer compositions and the identities built on them.

``H_p(x) = x (x-1) ... (x-p+1) / p!`` generalises the binomial coefficient
to arbitrary arguments; ``compositions(i, p)`` enumerates the ordered ways
of writing ``p`` as a sum of ``i`` positive parts.  Both drive the
Faa di Bruno-type sums used throughout the package.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

from .numbers import LogNum, is_exact


@dataclass(frozen=True)
class Composition:
    parts: tuple
    total: int

    def __post_init__(self):
        if sum(self.parts) != self.total or any(k < 1 for k in self.parts):
            raise ValueError(f"invalid composition {self.parts} of {self.total}")

    def __iter__(self):
        return iter(self.parts)

    def __len__(self):
        return len(self.parts)


def hilbert(p: int, x):
    """Evaluate the p-th Hilbert polynomial at ``x``.

    Integer and rational arguments give exact results (an ``int`` for
    integer ``x``); floats and :class:`~gwpenal.numbers.LogNum` values use
    their own arithmetic.
    """
    if p < 0:
        raise ValueError("p must be nonnegative")
    if isinstance(x, bool):
        x = int(x)
    if isinstance(x, int):
        if x >= 0:
            return math.comb(x, p)
        prod = 1
        for k in range(p):
            prod *= x - k
        return prod // math.factorial(p)
    if p == 0:
        return Fraction(1) if is_exact(x) else (LogNum(1, 0.0) if isinstance(x, LogNum) else 1.0)
    prod = x
    for k in range(1, p):
        prod = prod * (x - k)
    if is_exact(x):
        return Fraction(prod) / math.factorial(p)
    return prod / math.factorial(p)


def compositions(i: int, p: int) -> Iterator[Composition]:
    """Yield every composition of ``p`` into exactly ``i`` parts.

    Order is lexicographic in the parts.  Out-of-range ``i`` yields nothing.
    """
    if i < 1 or i > p:
        return
    # choose i-1 cut points among the p-1 gaps, in lexicographic order of parts
    for cuts in _lex_cuts(i, p):
        yield Composition(cuts, p)


def _lex_cuts(i, p):
    if i == 1:
        yield (p,)
        return
    for first in range(1, p - i + 2):
        for rest in _lex_cuts(i - 1, p - first):
            yield (first,) + rest


def composition_sum(coeffs: Sequence, i: int, p: int):
    """Sum over ``S_{i,p}`` of ``prod_j coeffs[n_j]``, by explicit enumeration.

    ``coeffs`` is indexed from 0; entry 0 is never used.
    """
    total = None
    for comp in compositions(i, p):
        term = None
        for part in comp.parts:
            term = coeffs[part] if term is None else term * coeffs[part]
        total = term if total is None else total + term
    if total is None:
        return _zero_for(coeffs)
    return total


def power_coefficients(coeffs: Sequence, i: int, p: int):
    """Coefficients ``[X^0..X^p]`` of ``(sum_{j>=1} coeffs[j] X^j) ** i``.

    Equivalent to :func:`composition_sum` at each order, computed by
    repeated truncated polynomial multiplication instead of enumeration.
    """
    zero = _zero_for(coeffs)
    base = [zero] + [coeffs[j] if j < len(coeffs) else zero for j in range(1, p + 1)]
    acc = [zero] * (p + 1)
    acc[0] = zero + 1
    for _ in range(i):
        new = [zero] * (p + 1)
        for a_deg, a in enumerate(acc):
            if not a:
                continue
            for b_deg in range(1, p + 1 - a_deg):
                b = base[b_deg]
                if b:
                    new[a_deg + b_deg] = new[a_deg + b_deg] + a * b
        acc = new
    return acc


def _zero_for(coeffs):
    for c in coeffs:
        if isinstance(c, LogNum):
            return LogNum(0, 0.0)
        if isinstance(c, float):
            return 0.0
    return Fraction(0)


@dataclass
class EqualityReport:
    lhs: object
    rhs: object
    equal: bool
    detail: dict

    def __bool__(self):
        return self.equal


def check_somme_Hk(w: int, t: Sequence[int]) -> EqualityReport:
    """Check ``H_w(sum t) == sum over index subsets and compositions``.

    Both sides are evaluated in exact integer arithmetic.
    """
    k = len(t)
    if k < 2 or w < 1:
        raise ValueError("need w >= 1 and at least two summands")
    lhs = hilbert(w, sum(t))
    rhs = 0
    for i in range(1, min(w, k) + 1):
        for idx in itertools.combinations(range(k), i):
            for comp in compositions(i, w):
                term = 1
                for s_j, r_j in zip(comp.parts, idx):
                    term *= hilbert(s_j, t[r_j])
                rhs += term
    return EqualityReport(lhs, rhs, lhs == rhs, {"w": w, "t": tuple(t)})


def coefficient_identity(a_table, p: int, partition: Sequence[int], tol: float = 1e-9) -> EqualityReport:
    """Check the product rule between the coefficient families ``a_s^{(l)}``.

    ``a_table[(s, l)]`` must hold ``a_s^{(l)}(n)`` for ``1 <= s <= l <= p``;
    missing pairs with ``s > l`` are read as zero.  The identity

        sum_{(l_1..l_i) in S_{i,p}} prod_j a_{s_j}^{(l_j)} = a_w^{(p)},
        w = s_1 + ... + s_i,

    is checked exactly for rational tables and within ``tol`` (relative,
    with an absolute floor of ``tol``) otherwise.
    """
    i = len(partition)
    w = sum(partition)

    def a(s, l):
        if s > l:
            return 0
        return a_table[(s, l)]

    lhs = 0
    for comp in compositions(i, p):
        term = 1
        for s_j, l_j in zip(partition, comp.parts):
            term = term * a(s_j, l_j)
        lhs = lhs + term
    rhs = a(w, p) if w <= p else 0
    if is_exact(lhs) and is_exact(rhs):
        ok = lhs == rhs
    else:
        ok = abs(float(lhs) - float(rhs)) <= tol * max(1.0, abs(float(rhs)))
    return EqualityReport(lhs, rhs, ok, {"p": p, "partition": tuple(partition)})
