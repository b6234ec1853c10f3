"""Exact coefficient fields: the rationals and prime fields F_p.

Scalars are plain Python values: ``Fraction`` when the characteristic is 0,
and ints in ``[0, p)`` when it is a prime p.  A ``Field`` instance carries the
characteristic and does all normalization, so polynomial and matrix code never
has to branch on the coefficient type.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

MAX_CHARACTERISTIC = 2**31


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


@dataclass(frozen=True)
class Field:
    """A prime field F_p (characteristic p) or the rationals (characteristic 0)."""

    characteristic: int

    def __post_init__(self):
        p = self.characteristic
        if p == 0:
            return
        if p >= MAX_CHARACTERISTIC or not _is_prime(p):
            raise ValueError(f"characteristic must be 0 or a prime < 2^31, got {p}")

    @property
    def zero(self):
        return 0 if self.characteristic else Fraction(0)

    @property
    def one(self):
        return 1 if self.characteristic else Fraction(1)

    def of(self, value):
        """Coerce an int, Fraction or 'a/b' string into a normalized scalar."""
        p = self.characteristic
        if isinstance(value, str):
            value = Fraction(value)
        if p == 0:
            return Fraction(value)
        if isinstance(value, Fraction):
            if value.denominator % p == 0:
                raise ZeroDivisionError(f"denominator {value.denominator} not invertible mod {p}")
            return value.numerator * pow(value.denominator, -1, p) % p
        return value % p

    def add(self, a, b):
        p = self.characteristic
        return (a + b) % p if p else a + b

    def sub(self, a, b):
        p = self.characteristic
        return (a - b) % p if p else a - b

    def mul(self, a, b):
        p = self.characteristic
        return (a * b) % p if p else a * b

    def neg(self, a):
        p = self.characteristic
        return (-a) % p if p else -a

    def inv(self, a):
        p = self.characteristic
        if p:
            if a % p == 0:
                raise ZeroDivisionError("inverse of 0")
            return pow(a, -1, p)
        if a == 0:
            raise ZeroDivisionError("inverse of 0")
        return Fraction(1) / a

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def is_zero(self, a) -> bool:
        return (a % self.characteristic == 0) if self.characteristic else a == 0

    def elements(self):
        """Iterate all field elements (prime fields only; used by exhaustive tests)."""
        p = self.characteristic
        if p == 0:
            raise ValueError("cannot enumerate the rationals")
        return range(p)

    def format(self, a) -> str:
        if self.characteristic:
            return str(a)
        return str(a) if a.denominator == 1 else f"{a.numerator}/{a.denominator}"


QQ = Field(0)
GF3 = Field(3)
DEFAULT_PRIME = 32003
GF32003 = Field(DEFAULT_PRIME)
