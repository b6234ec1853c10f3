"""Exact polynomial fitting of eventually-polynomial integer sequences.

Finite forward differences over the rationals: once the (r+1)-st differences
vanish on a sufficiently long tail, the sequence tail is the degree-r Newton
polynomial anchored there, and the fit is exact (no least squares anywhere).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List


class WindowTooShort(RuntimeError):
    """Differences never stabilized; the caller should enlarge the window."""


@dataclass
class PolyFit:
    """An exact polynomial fit P with P(n) = table(n) for n >= stabilization_index.

    coefficients are ascending powers of n, exact rationals; degree -1 encodes
    the zero polynomial.
    """

    degree: int
    coefficients: List[Fraction]
    stabilization_index: int
    window: tuple

    def evaluate(self, n: int) -> Fraction:
        acc = Fraction(0)
        power = Fraction(1)
        for c in self.coefficients:
            acc += c * power
            power *= n
        return acc

    @property
    def leading_coefficient(self) -> Fraction:
        if self.degree < 0:
            return Fraction(0)
        return self.coefficients[self.degree]


def poly_mul_linear(coeffs: List[Fraction], constant: Fraction) -> List[Fraction]:
    """Multiply a power-basis polynomial by (n + constant)."""
    out = [Fraction(0)] * (len(coeffs) + 1)
    for i, c in enumerate(coeffs):
        out[i + 1] += c
        out[i] += c * constant
    return out


def binomial_poly(shift: int, k: int) -> List[Fraction]:
    """C(n + shift, k) as exact power-basis coefficients in n."""
    coeffs = [Fraction(1)]
    for t in range(k):
        coeffs = poly_mul_linear(coeffs, Fraction(shift - t))
    fact = 1
    for t in range(1, k + 1):
        fact *= t
    return [c / fact for c in coeffs]


def fit_integer_table(values: Dict[int, int], min_zero_tail: int = 3) -> PolyFit:
    """Fit the eventual polynomial of an integer table {n: value}.

    The least degree r is chosen so that the (r+1)-st forward differences are
    zero on at least `min_zero_tail` consecutive trailing entries.  The
    returned stabilization index is the least n from which the table equals
    the polynomial.
    """
    if not values:
        raise WindowTooShort("empty table")
    ns = sorted(values)
    if ns != list(range(ns[0], ns[-1] + 1)):
        raise ValueError("table window must be a contiguous integer range")
    vals = [Fraction(values[n]) for n in ns]
    start = ns[0]

    if all(v == 0 for v in vals):
        if len(vals) < min_zero_tail:
            raise WindowTooShort("all-zero table shorter than the required tail")
        return PolyFit(-1, [], start, (ns[0], ns[-1]))

    rows = [vals]
    while len(rows[-1]) > 1:
        prev = rows[-1]
        rows.append([b - a for a, b in zip(prev, prev[1:])])

    for r in range(len(rows) - 1):
        diff = rows[r + 1]
        if len(diff) < min_zero_tail:
            break
        tail = diff[-min_zero_tail:]
        if any(t != 0 for t in tail):
            continue
        # anchor where the zero tail begins: all entries of diff from z on are 0
        z = len(diff)
        while z > 0 and diff[z - 1] == 0:
            z -= 1
        anchor = start + z  # table index where the Newton polynomial is anchored
        degree_cap = r
        poly = [Fraction(0)] * (degree_cap + 1)
        for j in range(degree_cap + 1):
            delta = rows[j][z] if z < len(rows[j]) else None
            if delta is None:
                raise WindowTooShort("window too short to anchor the Newton form")
            if delta == 0:
                continue
            term = binomial_poly(-anchor, j)  # C(n - anchor, j)
            for i, c in enumerate(term):
                poly[i] += delta * c
        while len(poly) > 1 and poly[-1] == 0:
            poly.pop()
        degree = len(poly) - 1 if any(c != 0 for c in poly) else -1
        # walk the stabilization index back from the anchor
        stab = anchor
        fit = PolyFit(degree, poly, stab, (ns[0], ns[-1]))
        while stab > start and fit.evaluate(stab - 1) == values[stab - 1]:
            stab -= 1
        fit.stabilization_index = stab
        return fit
    raise WindowTooShort(
        f"differences never vanished on {min_zero_tail} consecutive entries "
        f"over window [{ns[0]}, {ns[-1]}]")


def factorial(n: int) -> int:
    out = 1
    for t in range(2, n + 1):
        out *= t
    return out
