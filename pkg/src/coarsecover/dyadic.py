"""Exact dyadic rational scalars.

Every coordinate, distance, radius and bound in this package is a dyadic
rational ``num / 2**exp``.  Arithmetic never rounds and comparisons are
exact, so all downstream validators can use zero tolerance.
"""

from __future__ import annotations

from fractions import Fraction
from functools import total_ordering


@total_ordering
class Dyadic:
    """Dyadic rational in canonical form: ``num`` odd, or ``exp == 0``."""

    __slots__ = ("num", "exp")

    def __init__(self, num: int, exp: int = 0):
        if not isinstance(num, int) or not isinstance(exp, int):
            raise TypeError("Dyadic expects integer numerator and exponent")
        if exp < 0:
            num <<= -exp
            exp = 0
        while num != 0 and exp > 0 and num % 2 == 0:
            num //= 2
            exp -= 1
        if num == 0:
            exp = 0
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "exp", exp)

    def __setattr__(self, name, value):
        raise AttributeError("Dyadic values are immutable")

    # -- construction -------------------------------------------------

    @classmethod
    def coerce(cls, value) -> "Dyadic":
        if isinstance(value, Dyadic):
            return value
        if isinstance(value, int):
            return cls(value)
        if isinstance(value, str):
            return cls.parse(value)
        if isinstance(value, Fraction):
            return cls.from_fraction(value)
        raise TypeError(f"cannot interpret {value!r} as a dyadic rational")

    @classmethod
    def parse(cls, text: str) -> "Dyadic":
        """Parse '3', '-7/8' or '1.25' (denominator must be a power of two)."""
        return cls.from_fraction(Fraction(text.strip()))

    @classmethod
    def from_fraction(cls, frac: Fraction) -> "Dyadic":
        den = frac.denominator
        if den & (den - 1) != 0:
            raise ValueError(f"{frac} is not a dyadic rational")
        return cls(frac.numerator, den.bit_length() - 1)

    @classmethod
    def two_pow(cls, e: int) -> "Dyadic":
        """2**e for any integer e (negative e gives 1/2**|e|)."""
        if e >= 0:
            return cls(1 << e)
        return cls(1, -e)

    # -- conversions --------------------------------------------------

    def as_fraction(self) -> Fraction:
        return Fraction(self.num, 1 << self.exp)

    def __float__(self) -> float:
        return self.num / (1 << self.exp)

    def __int__(self) -> int:
        if self.exp != 0:
            raise ValueError(f"{self} is not an integer")
        return self.num

    def is_integer(self) -> bool:
        return self.exp == 0

    # -- arithmetic ---------------------------------------------------

    def __add__(self, other) -> "Dyadic":
        other = Dyadic.coerce(other)
        e = max(self.exp, other.exp)
        return Dyadic((self.num << (e - self.exp)) + (other.num << (e - other.exp)), e)

    __radd__ = __add__

    def __sub__(self, other) -> "Dyadic":
        return self + (-Dyadic.coerce(other))

    def __rsub__(self, other) -> "Dyadic":
        return (-self) + Dyadic.coerce(other)

    def __neg__(self) -> "Dyadic":
        return Dyadic(-self.num, self.exp)

    def __mul__(self, other) -> "Dyadic":
        other = Dyadic.coerce(other)
        return Dyadic(self.num * other.num, self.exp + other.exp)

    __rmul__ = __mul__

    def __abs__(self) -> "Dyadic":
        return Dyadic(abs(self.num), self.exp)

    def exact_div(self, other) -> "Dyadic":
        """Exact quotient; raises if the result is not dyadic."""
        other = Dyadic.coerce(other)
        if other.num == 0:
            raise ZeroDivisionError("division by zero dyadic")
        return Dyadic.from_fraction(self.as_fraction() / other.as_fraction())

    def floordiv(self, other) -> int:
        """floor(self / other) as an exact integer."""
        other = Dyadic.coerce(other)
        if other.num == 0:
            raise ZeroDivisionError("division by zero dyadic")
        a = self.num << other.exp
        b = other.num << self.exp
        return a // b if b > 0 else (-a) // (-b)

    def ceildiv(self, other) -> int:
        other = Dyadic.coerce(other)
        return -((-self).floordiv(other))

    def is_multiple_of(self, step) -> bool:
        step = Dyadic.coerce(step)
        if step.num == 0:
            return self.num == 0
        q = self.as_fraction() / step.as_fraction()
        return q.denominator == 1

    def nearest_lattice_distance(self, step) -> "Dyadic":
        """Distance to the nearest multiple of ``step`` (step > 0)."""
        step = Dyadic.coerce(step)
        k = self.floordiv(step)
        below = step * k
        above = step * (k + 1)
        return min(self - below, above - self)

    # -- ordering -----------------------------------------------------

    def _key(self, other: "Dyadic"):
        e = max(self.exp, other.exp)
        return self.num << (e - self.exp), other.num << (e - other.exp)

    def __eq__(self, other) -> bool:
        try:
            other = Dyadic.coerce(other)
        except TypeError:
            return NotImplemented
        return self.num == other.num and self.exp == other.exp

    def __lt__(self, other) -> bool:
        other = Dyadic.coerce(other)
        a, b = self._key(other)
        return a < b

    def __hash__(self):
        return hash((self.num, self.exp))

    def __bool__(self) -> bool:
        return self.num != 0

    # -- formatting ---------------------------------------------------

    def __str__(self) -> str:
        if self.exp == 0:
            return str(self.num)
        return f"{self.num}/{1 << self.exp}"

    def __repr__(self) -> str:
        return f"Dyadic({self.num}, {self.exp})"


def dy(value) -> Dyadic:
    """Shorthand coercion used throughout the package."""
    return Dyadic.coerce(value)


ZERO = Dyadic(0)
ONE = Dyadic(1)


def dyadic_gcd(values) -> Dyadic:
    """Largest dyadic dividing every value (values not all zero)."""
    from math import gcd

    fracs = [Dyadic.coerce(v).as_fraction() for v in values]
    fracs = [f for f in fracs if f != 0]
    if not fracs:
        raise ValueError("dyadic_gcd of all-zero values")
    e = max(f.denominator.bit_length() - 1 for f in fracs)
    nums = [abs(f.numerator) << (e - (f.denominator.bit_length() - 1)) for f in fracs]
    g = 0
    for n in nums:
        g = gcd(g, n)
    return Dyadic(g, e)
