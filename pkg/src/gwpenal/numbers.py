"""Scalar helpers shared by the exact, float and log-magnitude code paths.

Three number types flow through the library:

* :class:`fractions.Fraction` (and ``int``) in exact mode,
* ``float`` in float mode,
* :class:`LogNum`, a ``(sign, log|x|)`` pair used once float magnitudes
  drop below :data:`UNDERFLOW_THRESHOLD`.

All arithmetic in :mod:`gwpenal.jets` is written against the common
``+ - * / **`` protocol so the same code serves the three of them.
"""
from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational

from .errors import DomainError, ExactSizeError

#: Magnitude below which float computations switch to :class:`LogNum`.
UNDERFLOW_THRESHOLD = 1e-280

#: Default cap on numerator/denominator bit length in exact mode.
DEFAULT_BIT_CAP = 16384


class LogNum:
    """Real number stored as a sign and the natural log of its magnitude.

    Supports the arithmetic needed by jet composition. Mixed operations
    with ``int``, ``float`` and ``Fraction`` coerce the other operand.
    """

    __slots__ = ("sign", "log")

    def __init__(self, sign, log):
        if sign == 0:
            self.sign, self.log = 0, -math.inf
        else:
            self.sign = 1 if sign > 0 else -1
            self.log = float(log)

    @classmethod
    def of(cls, x):
        if isinstance(x, LogNum):
            return x
        if isinstance(x, Fraction):
            if x == 0:
                return cls(0, 0.0)
            return cls(1 if x > 0 else -1, _log_abs_fraction(x))
        x = float(x) if not isinstance(x, int) else x
        if x == 0:
            return cls(0, 0.0)
        if isinstance(x, int):
            return cls(1 if x > 0 else -1, math.log(abs(x)))
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    def __float__(self):
        if self.sign == 0:
            return 0.0
        if self.log < -745.2:
            return 0.0 * self.sign
        return self.sign * math.exp(self.log)

    def __repr__(self):
        return f"LogNum({self.sign:+d}, {self.log!r})"

    def __neg__(self):
        return LogNum(-self.sign, self.log)

    def __abs__(self):
        return LogNum(abs(self.sign), self.log)

    def __bool__(self):
        return self.sign != 0

    def __add__(self, other):
        other = LogNum.of(other)
        if other.sign == 0:
            return self
        if self.sign == 0:
            return other
        hi, lo = (self, other) if self.log >= other.log else (other, self)
        diff = lo.log - hi.log
        if hi.sign == lo.sign:
            return LogNum(hi.sign, hi.log + math.log1p(math.exp(diff)))
        if diff == 0.0:
            return LogNum(0, 0.0)
        return LogNum(hi.sign, hi.log + math.log1p(-math.exp(diff)))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-LogNum.of(other))

    def __rsub__(self, other):
        return LogNum.of(other) + (-self)

    def __mul__(self, other):
        other = LogNum.of(other)
        if self.sign == 0 or other.sign == 0:
            return LogNum(0, 0.0)
        return LogNum(self.sign * other.sign, self.log + other.log)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = LogNum.of(other)
        if other.sign == 0:
            raise ZeroDivisionError("LogNum division by zero")
        if self.sign == 0:
            return LogNum(0, 0.0)
        return LogNum(self.sign * other.sign, self.log - other.log)

    def __rtruediv__(self, other):
        return LogNum.of(other) / self

    def __pow__(self, k):
        if not isinstance(k, int):
            raise TypeError("LogNum only supports integer powers")
        if k == 0:
            return LogNum(1, 0.0)
        if self.sign == 0:
            if k < 0:
                raise ZeroDivisionError("0 to a negative power")
            return LogNum(0, 0.0)
        sign = self.sign if k % 2 else 1
        return LogNum(sign, self.log * k)

    def _cmp_key(self):
        if self.sign == 0:
            return (0, 0.0)
        return (self.sign, self.sign * self.log)

    def __eq__(self, other):
        try:
            other = LogNum.of(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self._cmp_key() == other._cmp_key()

    def __lt__(self, other):
        return self._cmp_key() < LogNum.of(other)._cmp_key()

    def __le__(self, other):
        return self._cmp_key() <= LogNum.of(other)._cmp_key()

    def __gt__(self, other):
        return self._cmp_key() > LogNum.of(other)._cmp_key()

    def __ge__(self, other):
        return self._cmp_key() >= LogNum.of(other)._cmp_key()

    def __hash__(self):
        return hash(self._cmp_key())


def _log_abs_fraction(x: Fraction) -> float:
    # math.log accepts arbitrarily large ints, so huge rationals stay finite
    return math.log(abs(x.numerator)) - math.log(x.denominator)


def is_exact(x) -> bool:
    return isinstance(x, Rational)


def as_exact(x) -> Fraction:
    """Parse ``x`` (int, Fraction or string such as ``"1/4"``) to a Fraction.

    Floats are refused: a float silently promoted to a rational would carry
    its binary rounding into every exact identity downstream.
    """
    if isinstance(x, float):
        raise DomainError(f"refusing to treat float {x!r} as an exact rational")
    return Fraction(x)


def log_abs(x) -> float:
    if isinstance(x, LogNum):
        return x.log
    if isinstance(x, Fraction):
        return -math.inf if x == 0 else _log_abs_fraction(x)
    return math.log(abs(x)) if x != 0 else -math.inf


def to_float(x) -> float:
    return float(x)


def zero_like(x):
    if isinstance(x, LogNum):
        return LogNum(0, 0.0)
    if isinstance(x, Rational):
        return Fraction(0)
    return 0.0


def one_like(x):
    if isinstance(x, LogNum):
        return LogNum(1, 0.0)
    if isinstance(x, Rational):
        return Fraction(1)
    return 1.0


def check_bits(values, cap: int = DEFAULT_BIT_CAP):
    """Raise :class:`ExactSizeError` if any rational exceeds ``cap`` bits."""
    for v in values:
        if isinstance(v, Fraction):
            bits = max(v.numerator.bit_length(), v.denominator.bit_length())
            if bits > cap:
                raise ExactSizeError(
                    f"exact rational grew to {bits} bits (cap {cap}); "
                    "use float mode for this computation",
                    bound="bit_cap",
                    stats={"bits": bits},
                )


def needs_log_space(values, previous=None) -> bool:
    """True when a float coefficient has (nearly) underflowed.

    A nonzero magnitude under the threshold counts, and so does an exact
    zero whose counterpart in ``previous`` was nonzero.
    """
    for j, v in enumerate(values):
        if not isinstance(v, float):
            continue
        if 0.0 < abs(v) < UNDERFLOW_THRESHOLD:
            return True
        if v == 0.0 and previous is not None and j < len(previous) and previous[j] != 0:
            return True
    return False
