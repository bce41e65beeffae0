"""Offspring distributions and their classical characteristics.

An :class:`OffspringDistribution` is a finite probability vector
``(q_0, ..., q_K)`` held either as rationals (``mode="exact"``) or floats.
:func:`characterize` returns the mean, the extinction probability, the
minimal support point and the slope of the generating function at the
extinction probability.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, ResourceCapError
from .numbers import as_exact

log = logging.getLogger(__name__)

FLOAT_NORMALIZATION_TOL = 1e-12
DEFAULT_STATE_CAP = 10**6

SUBCRITICAL = "subcritical"
CRITICAL = "critical"
SCHROEDER = "supercritical-Schroeder"
BOETTCHER = "supercritical-Boettcher"


@dataclass(frozen=True, eq=True)
class OffspringDistribution:
    """Finite-support offspring law ``q``.

    Use :meth:`of` to build one from user input; the constructor assumes
    already-normalised, already-typed probabilities.
    """

    probs: tuple
    mode: str = "exact"
    degenerate: bool = field(default=False, compare=False)

    @classmethod
    def of(cls, probs: Sequence, mode: str | None = None, degenerate: bool = False):
        probs = list(probs)
        if mode is None:
            mode = "float" if any(isinstance(p, float) for p in probs) else "exact"
        if mode not in ("exact", "float"):
            raise DomainError(f"unknown numeric mode {mode!r}")
        if mode == "exact":
            vals = [as_exact(p) for p in probs]
        else:
            vals = [float(Fraction(p)) if isinstance(p, str) else float(p) for p in probs]
        while len(vals) > 2 and vals[-1] == 0:
            vals.pop()
        if len(vals) < 2:
            vals = vals + [vals[0] * 0] * (2 - len(vals))
        if any(v < 0 for v in vals):
            raise DomainError("probabilities must be nonnegative")
        total = sum(vals)
        if mode == "exact" and total != 1:
            raise DomainError(f"probabilities sum to {total}, not 1")
        if mode == "float" and abs(total - 1.0) > FLOAT_NORMALIZATION_TOL:
            raise DomainError(f"probabilities sum to {total!r}, not 1 within {FLOAT_NORMALIZATION_TOL}")
        if vals[1] == 1 and not degenerate:
            raise DomainError("the degenerate law q_1 = 1 requires degenerate=True")
        return cls(tuple(vals), mode, degenerate)

    # -- basic accessors -------------------------------------------------

    @property
    def exact(self) -> bool:
        return self.mode == "exact"

    @property
    def K(self) -> int:
        return len(self.probs) - 1

    @property
    def one(self):
        return Fraction(1) if self.exact else 1.0

    @property
    def zero(self):
        return Fraction(0) if self.exact else 0.0

    def __getitem__(self, k):
        return self.probs[k] if 0 <= k < len(self.probs) else self.zero

    def convert(self, x):
        """Coerce a scalar into this distribution's number type."""
        if self.exact:
            return as_exact(x)
        return float(x)

    @cached_property
    def mean(self):
        return sum(k * p for k, p in enumerate(self.probs))

    @cached_property
    def a_min(self) -> int:
        return next(k for k, p in enumerate(self.probs) if p > 0)

    def pgf(self, s):
        """Generating function ``f(s)`` by Horner's rule."""
        acc = self.probs[-1] * (s * 0 + 1)
        for p in reversed(self.probs[:-1]):
            acc = acc * s + p
        return acc

    def pgf_derivative(self, s, j: int = 1):
        """``f^{(j)}(s)``."""
        acc = None
        for k in range(len(self.probs) - 1, j - 1, -1):
            c = self.probs[k] * math.perm(k, j)
            acc = c if acc is None else acc * s + c
        return self.zero if acc is None else acc

    def factorial_moment(self, j: int):
        """``f^{(j)}(1) / j! = sum_k q_k C(k, j)``."""
        return sum(p * math.comb(k, j) for k, p in enumerate(self.probs))

    def to_json(self) -> dict:
        if self.exact:
            return {"probs": [str(p) for p in self.probs], "mode": "exact"}
        return {"probs": list(self.probs), "mode": "float"}

    def __str__(self):
        return "(" + ", ".join(str(p) for p in self.probs) + ")"


def load_distribution(source) -> OffspringDistribution:
    """Read a distribution config: a path to a JSON file, a JSON string or a dict.

    The JSON object has ``probs`` (rational strings in exact mode, numbers
    in float mode), ``mode`` and optionally ``degenerate``.
    """
    if isinstance(source, dict):
        cfg = source
    else:
        text = str(source)
        if not text.lstrip().startswith("{"):
            text = Path(text).read_text()
        try:
            cfg = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DomainError(f"malformed distribution JSON: {exc}") from exc
    if "probs" not in cfg:
        raise DomainError("distribution config needs a 'probs' array")
    mode = cfg.get("mode", "exact")
    probs = cfg["probs"]
    if mode == "exact":
        probs = [p if isinstance(p, (str, int)) else _reject_float(p) for p in probs]
    return OffspringDistribution.of(probs, mode=mode, degenerate=bool(cfg.get("degenerate", False)))


def _reject_float(p):
    raise DomainError(f"exact-mode probability {p!r} must be a rational string such as '1/4'")


# ---------------------------------------------------------------- criticality


@dataclass(frozen=True)
class Criticality:
    mu: object
    kappa: object
    a_min: int
    gamma: object
    regime: str


def characterize(q: OffspringDistribution) -> Criticality:
    mu = q.mean
    a = q.a_min
    if q.probs[1] == 1:
        if not q.degenerate:
            raise DomainError("degenerate law q_1 = 1 needs the degenerate flag")
        kappa = q.zero
    elif mu <= 1:
        kappa = q.one
    elif q.probs[0] == 0:
        kappa = q.zero
    else:
        kappa = _smallest_fixed_point(q)
    gamma = q.pgf_derivative(kappa, 1)
    if mu < 1:
        regime = SUBCRITICAL
    elif mu == 1:
        regime = CRITICAL
    elif a <= 1:
        regime = SCHROEDER
    else:
        regime = BOETTCHER
    return Criticality(mu, kappa, a, gamma, regime)


def _newton_root(q, start, lo, hi, iters=200):
    """Monotone Newton iteration for ``f(s) = s`` from a point where ``f(s) - s > 0``.

    Convexity of ``f`` makes the iterates monotone, so the loop stops when
    they stop moving.
    """
    fl = [float(p) for p in q.probs]

    def g(s):
        acc = 0.0
        for p in reversed(fl):
            acc = acc * s + p
        return acc - s

    def dg(s):
        acc = 0.0
        for k in range(len(fl) - 1, 0, -1):
            acc = acc * s + k * fl[k]
        return acc - 1.0

    s = start
    for _ in range(iters):
        step = g(s) / dg(s)
        nxt = min(max(s - step, lo), hi)
        if nxt == s:
            break
        s = nxt
    return s


def _rational_roots(q, lo, hi):
    """Exact rational roots of ``f(s) - s`` inside ``(lo, hi)``, via the rational root theorem."""
    coeffs = list(q.probs)
    coeffs[1] -= 1
    denom = math.lcm(*(c.denominator for c in coeffs))
    ints = [int(c * denom) for c in coeffs]
    while ints and ints[0] == 0:
        ints.pop(0)  # s = 0 roots are not wanted here
    if not ints or abs(ints[0]) > 10**12 or abs(ints[-1]) > 10**12:
        return []
    roots = []
    for num in _divisors(abs(ints[0])):
        for den in _divisors(abs(ints[-1])):
            for sign in (1, -1):
                r = Fraction(sign * num, den)
                if lo < r < hi and q.pgf(r) == r and r not in roots:
                    roots.append(r)
    return sorted(roots)


def _divisors(n):
    small, large = [], []
    d = 1
    while d * d <= n:
        if n % d == 0:
            small.append(d)
            if d * d != n:
                large.append(n // d)
        d += 1
    return small + large[::-1]


def _smallest_fixed_point(q):
    approx = _newton_root(q, 0.0, 0.0, 1.0)
    if q.exact:
        for r in _rational_roots(q, Fraction(0), Fraction(1)):
            if abs(float(r) - approx) < 1e-9:
                return r
        log.info("extinction probability of %s is irrational; using float %r", q, approx)
    return approx


def second_fixed_point(q: OffspringDistribution):
    """The fixed point ``kappa > 1`` of a sub-critical ``f``.

    Finite support means ``f`` is a polynomial, so such a point exists as
    soon as ``f`` has degree at least 2.
    """
    if q.mean >= 1:
        raise DomainError("a fixed point above 1 exists only for sub-critical laws")
    if q.K < 2:
        raise DomainError("linear generating function has no fixed point above 1")
    hi = 2.0
    while float(q.pgf(hi)) - hi <= 0:
        hi *= 2
        if hi > 1e300:
            raise DomainError("no fixed point above 1 found")
    approx = _newton_root(q, hi, 1.0, hi)
    if q.exact:
        for r in _rational_roots(q, Fraction(1), Fraction(math.ceil(hi) + 1)):
            if abs(float(r) - approx) < 1e-9 * max(1.0, approx):
                return r
        log.info("second fixed point of %s is irrational; using float %r", q, approx)
    return approx


def conjugate(q: OffspringDistribution) -> OffspringDistribution:
    """Conjugate law ``q_bar[n] = kappa**(n-1) * q[n]``.

    For a sub-critical ``q`` kappa is the fixed point above 1; for a
    super-critical ``q`` it is the extinction probability in ``(0, 1)``.
    An irrational kappa in exact mode yields a float-mode result.
    """
    crit = characterize(q)
    if crit.regime == SUBCRITICAL:
        kappa = second_fixed_point(q)
    elif crit.regime in (SCHROEDER, BOETTCHER) and 0 < crit.kappa < 1:
        kappa = crit.kappa
    else:
        raise DomainError(f"no conjugating fixed point for a {crit.regime} law with kappa={crit.kappa}")
    exact = q.exact and isinstance(kappa, Fraction)
    probs = [kappa ** (n - 1) * p if p else p * 0 for n, p in enumerate(q.probs)]
    if exact:
        return OffspringDistribution.of(probs, mode="exact")
    probs = [float(p) for p in probs]
    total = sum(probs)
    return OffspringDistribution.of([p / total for p in probs], mode="float")


# ---------------------------------------------------------------- generation laws


def convolve(a, b):
    """Discrete convolution; float inputs go through numpy, rationals stay exact."""
    if a and b and isinstance(a[0], float) and isinstance(b[0], float):
        return list(np.convolve(a, b))
    out = [a[0] * 0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                if y:
                    out[i + j] += x * y
    return out


class ConvolutionPowers:
    """Cache of ``q^{*j}``, the law of the total offspring of ``j`` individuals."""

    def __init__(self, q: OffspringDistribution):
        self.q = q
        self._powers = [[q.one]]

    def __getitem__(self, j: int) -> list:
        while len(self._powers) <= j:
            self._powers.append(convolve(self._powers[-1], list(self.q.probs)))
        return self._powers[j]


def generation_law(q: OffspringDistribution, n: int, state_cap: int = DEFAULT_STATE_CAP) -> list:
    """Exact law of ``Z_n`` as a list indexed by population size."""
    if n < 0:
        raise DomainError("n must be nonnegative")
    if q.K ** n + 1 > state_cap:
        raise ResourceCapError(
            f"law of Z_{n} has up to {q.K ** n + 1} states, above state_cap={state_cap}",
            bound="state_cap",
        )
    law = [q.zero, q.one]
    for _ in range(n):
        # f_{m+1} = f o f_m: combine the K+1 powers of the current law
        acc = [q.zero] * ((len(law) - 1) * q.K + 1)
        power = [q.one]
        for k, p in enumerate(q.probs):
            if k:
                power = convolve(power, law)
            if p:
                for i, v in enumerate(power):
                    acc[i] += p * v
        law = _trim(acc)
    return law


def _trim(law):
    while len(law) > 1 and not law[-1]:
        law.pop()
    return law


def support(law) -> list:
    return [z for z, p in enumerate(law) if p]


def sample_gw(q: OffspringDistribution, height: int, rng_seed: int, **caps):
    """One tree truncated at ``height``; see :func:`gwpenal.sampling.sample_gw`."""
    from .sampling import sample_gw as _sample

    return _sample(q, height, rng_seed, **caps)
