"""Non-negative reals with an unbounded binary exponent.

Values are stored as ``mantissa * 2**exponent`` with ``mantissa`` in ``[1, 2)``
(or exactly 0), so probabilities far below the smallest subnormal double stay
representable at double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import total_ordering
from typing import Union

LN2 = math.log(2.0)
LOG10_2 = math.log10(2.0)

Number = Union[int, float, "ExtendedProb"]


@total_ordering
@dataclass(frozen=True, slots=True, eq=False)
class ExtendedProb:
    mantissa: float
    exponent: int

    # construction --------------------------------------------------------

    @classmethod
    def _normal(cls, m: float, e: int) -> ExtendedProb:
        if m == 0.0:
            return ZERO
        if not math.isfinite(m) or m < 0:
            raise ValueError(f"ExtendedProb needs a finite non-negative value, got {m}")
        fm, fe = math.frexp(m)  # fm in [0.5, 1)
        return cls(fm * 2.0, e + fe - 1)

    @classmethod
    def of(cls, x: Number) -> ExtendedProb:
        if isinstance(x, ExtendedProb):
            return x
        return cls._normal(float(x), 0)

    @classmethod
    def from_log(cls, ln_value: float) -> ExtendedProb:
        """Value whose natural logarithm is ``ln_value`` (``-inf`` gives zero)."""
        if ln_value == -math.inf:
            return ZERO
        return cls.from_log2(ln_value / LN2)

    @classmethod
    def from_log2(cls, log2_value: float) -> ExtendedProb:
        if log2_value == -math.inf:
            return ZERO
        e = math.floor(log2_value)
        return cls._normal(2.0 ** (log2_value - e), e)

    # conversion ----------------------------------------------------------

    def __float__(self) -> float:
        if self.mantissa == 0.0:
            return 0.0
        try:
            return math.ldexp(self.mantissa, self.exponent)
        except OverflowError:
            return math.inf

    def log(self) -> float:
        if self.mantissa == 0.0:
            return -math.inf
        return math.log(self.mantissa) + self.exponent * LN2

    def log10(self) -> float:
        if self.mantissa == 0.0:
            return -math.inf
        return math.log10(self.mantissa) + self.exponent * LOG10_2

    def is_zero(self) -> bool:
        return self.mantissa == 0.0

    def decimal(self, digits: int = 6) -> tuple[float, int]:
        """``(m, d)`` with ``value ~= m * 10**d`` and ``1 <= m < 10`` at ``digits`` significant figures."""
        if self.mantissa == 0.0:
            return 0.0, 0
        l10 = self.log10()
        d = math.floor(l10)
        m = round(10.0 ** (l10 - d), digits - 1)
        if m >= 10.0:
            m, d = round(m / 10.0, digits - 1), d + 1
        return m, d

    def format(self, digits: int = 6) -> str:
        if self.mantissa == 0.0:
            return "0"
        m, d = self.decimal(digits)
        return f"{m:.{digits - 1}f}e{'-' if d < 0 else '+'}{abs(d):02d}"

    def __repr__(self) -> str:
        return f"ExtendedProb({self.format(10)})"

    __str__ = format

    # arithmetic ----------------------------------------------------------

    def __add__(self, other: Number) -> ExtendedProb:
        other = ExtendedProb.of(other)
        if other.mantissa == 0.0:
            return self
        if self.mantissa == 0.0:
            return other
        big, small = (self, other) if self.exponent >= other.exponent else (other, self)
        shift = small.exponent - big.exponent
        return ExtendedProb._normal(big.mantissa + math.ldexp(small.mantissa, max(shift, -1100)), big.exponent)

    __radd__ = __add__

    def __sub__(self, other: Number) -> ExtendedProb:
        """Difference of two values; tiny negative rounding residue clamps to zero."""
        other = ExtendedProb.of(other)
        if other.mantissa == 0.0:
            return self
        e = max(self.exponent, other.exponent)
        diff = (math.ldexp(self.mantissa, max(self.exponent - e, -1100))
                - math.ldexp(other.mantissa, max(other.exponent - e, -1100)))
        if diff < 0:
            if diff < -2e-12:
                raise ValueError("ExtendedProb subtraction would be negative")
            return ZERO
        return ExtendedProb._normal(diff, e)

    def __rsub__(self, other: Number) -> ExtendedProb:
        return ExtendedProb.of(other) - self

    def __mul__(self, other: Number) -> ExtendedProb:
        other = ExtendedProb.of(other)
        if self.mantissa == 0.0 or other.mantissa == 0.0:
            return ZERO
        return ExtendedProb._normal(self.mantissa * other.mantissa, self.exponent + other.exponent)

    __rmul__ = __mul__

    def __truediv__(self, other: Number) -> ExtendedProb:
        other = ExtendedProb.of(other)
        if other.mantissa == 0.0:
            raise ZeroDivisionError("ExtendedProb division by zero")
        if self.mantissa == 0.0:
            return ZERO
        return ExtendedProb._normal(self.mantissa / other.mantissa, self.exponent - other.exponent)

    def __pow__(self, k: Union[int, float]) -> ExtendedProb:
        if isinstance(k, int) and k >= 0:
            result, base = ONE, self
            while k:
                if k & 1:
                    result = result * base
                base = base * base
                k >>= 1
            return result
        if k < 0 and self.mantissa == 0.0:
            raise ZeroDivisionError("zero to a negative power")
        if self.mantissa == 0.0:
            return ONE if k == 0 else ZERO
        return ExtendedProb.from_log2((math.log2(self.mantissa) + self.exponent) * k)

    # comparison ----------------------------------------------------------

    def _key(self) -> tuple[int, int, float]:
        if self.mantissa == 0.0:
            return (0, 0, 0.0)
        return (1, self.exponent, self.mantissa)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, float)):
            other = ExtendedProb.of(other)
        if not isinstance(other, ExtendedProb):
            return NotImplemented
        return self._key() == other._key()

    def __lt__(self, other: Number) -> bool:
        return self._key() < ExtendedProb.of(other)._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def clamp(self, upper: float = 1.0) -> ExtendedProb:
        return self if self <= upper else ExtendedProb.of(upper)


ZERO = ExtendedProb(0.0, 0)
ONE = ExtendedProb(1.0, 0)
