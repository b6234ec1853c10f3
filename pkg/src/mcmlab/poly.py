"""Sparse multivariate polynomials and ambient/quotient ring descriptions.

A polynomial is a dict mapping exponent tuples (one nonnegative int per
variable) to nonzero field scalars; the zero polynomial is the empty dict.
All normal forms are taken with respect to the degree-lexicographic order:
monomials are compared first by total degree, then lexicographically.  This
order is degree-compatible, so truncation at a total degree is well defined
and basis slices of a fixed degree are contiguous.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Tuple

from .fields import Field, GF32003

Mono = Tuple[int, ...]
Poly = Dict[Mono, object]


class PolyParseError(ValueError):
    """Raised on malformed polynomial text; carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


# ---------------------------------------------------------------------------
# monomial helpers


def mono_deg(m: Mono) -> int:
    return sum(m)


def mono_mul(a: Mono, b: Mono) -> Mono:
    return tuple(x + y for x, y in zip(a, b))


def mono_divides(a: Mono, b: Mono) -> bool:
    return all(x <= y for x, y in zip(a, b))


def deglex_key(m: Mono):
    """Sort key for the global degree-lexicographic order (ascending)."""
    return (sum(m), m)


def monomials_of_degree(nvars: int, degree: int) -> List[Mono]:
    """All exponent tuples of total degree == degree, lexicographically ascending."""
    if nvars == 1:
        return [(degree,)]
    out = []
    for e in range(degree + 1):
        out.extend((e,) + rest for rest in monomials_of_degree(nvars - 1, degree - e))
    return out


def monomials_up_to(nvars: int, degree: int) -> List[Mono]:
    """All exponent tuples of total degree <= degree, in ascending deglex order."""
    out: List[Mono] = []
    for d in range(degree + 1):
        out.extend(monomials_of_degree(nvars, d))
    return out


# ---------------------------------------------------------------------------
# polynomial arithmetic (field passed explicitly; zero coefficients never stored)


def p_zero() -> Poly:
    return {}


def p_is_zero(p: Poly) -> bool:
    return not p


def p_const(nvars: int, value, fld: Field) -> Poly:
    c = fld.of(value)
    return {} if fld.is_zero(c) else {(0,) * nvars: c}


def p_var(nvars: int, idx: int, fld: Field) -> Poly:
    e = [0] * nvars
    e[idx] = 1
    return {tuple(e): fld.one}


def p_add(a: Poly, b: Poly, fld: Field) -> Poly:
    out = dict(a)
    for m, c in b.items():
        s = fld.add(out.get(m, fld.zero), c)
        if fld.is_zero(s):
            out.pop(m, None)
        else:
            out[m] = s
    return out


def p_neg(a: Poly, fld: Field) -> Poly:
    return {m: fld.neg(c) for m, c in a.items()}


def p_sub(a: Poly, b: Poly, fld: Field) -> Poly:
    return p_add(a, p_neg(b, fld), fld)


def p_scale(s, a: Poly, fld: Field) -> Poly:
    if fld.is_zero(s):
        return {}
    return {m: fld.mul(s, c) for m, c in a.items()}


def p_mul(a: Poly, b: Poly, fld: Field) -> Poly:
    out: Poly = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            m = mono_mul(ma, mb)
            s = fld.add(out.get(m, fld.zero), fld.mul(ca, cb))
            if fld.is_zero(s):
                out.pop(m, None)
            else:
                out[m] = s
    return out


def p_mono_shift(u: Mono, a: Poly) -> Poly:
    """Multiply by the monomial u (no coefficient work needed)."""
    return {mono_mul(u, m): c for m, c in a.items()}


def p_truncate(a: Poly, max_degree: int) -> Poly:
    """Drop every term of total degree > max_degree."""
    return {m: c for m, c in a.items() if sum(m) <= max_degree}


def total_degree(p: Poly) -> int:
    """Maximum total degree of a term; -1 for the zero polynomial."""
    return max((sum(m) for m in p), default=-1)


def lowest_degree(p: Poly) -> int:
    """Minimum total degree of a term (the order of the element at the origin)."""
    if not p:
        raise ValueError("lowest_degree of the zero polynomial is undefined")
    return min(sum(m) for m in p)


def constant_coeff(p: Poly, fld: Field):
    nvars = len(next(iter(p))) if p else 0
    return p.get((0,) * nvars, fld.zero)


def p_equal(a: Poly, b: Poly) -> bool:
    return a == b


def poly_key(p: Poly) -> tuple:
    """Canonical hashable form, usable as a cache key."""
    items = []
    for m in sorted(p, key=deglex_key):
        c = p[m]
        items.append((m, (c.numerator, c.denominator) if hasattr(c, "denominator") else int(c)))
    return tuple(items)


# ---------------------------------------------------------------------------
# parsing and printing

_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z][A-Za-z0-9]*)|(\^)|(\*)|(\+)|(-)|(\())")


def _variable_names(nvars: int) -> List[str]:
    if nvars <= 3:
        return ["x", "y", "z"][:nvars]
    return [f"x{i + 1}" for i in range(nvars)]


def _name_table(nvars: int) -> Dict[str, int]:
    table = {f"x{i + 1}": i for i in range(nvars)}
    for i, nm in enumerate(["x", "y", "z"][: min(nvars, 3)]):
        table.setdefault(nm, i)
    return table


def poly_parse(text: str, ring: "Ring") -> Poly:
    """Parse a signed sum of coefficient*monomial terms into canonical form.

    Grammar: terms joined by + or -; each term is an optional integer
    coefficient and optional variable powers, joined by optional '*'.
    Inverse to poly_print on canonical forms.
    """
    fld = ring.field
    names = _name_table(ring.variable_count)
    pos = 0
    n = len(text)
    result: Poly = {}
    sign = 1
    expect_term = True
    current_coeff = None
    current_expt = None

    def flush(at):
        nonlocal current_coeff, current_expt, result, sign
        if current_coeff is None and current_expt is None:
            raise PolyParseError("empty term", at)
        c = fld.of(sign if current_coeff is None else sign * current_coeff)
        m = tuple(current_expt) if current_expt is not None else (0,) * ring.variable_count
        result = p_add(result, {m: c} if not fld.is_zero(c) else {}, fld)
        current_coeff = None
        current_expt = None
        sign = 1

    while pos < n:
        mt = _TOKEN.match(text, pos)
        if not mt or mt.end() == mt.start():
            if text[pos:].strip() == "":
                break
            raise PolyParseError(f"unexpected character {text[pos:].lstrip()[0]!r}", pos)
        pos = mt.end()
        num, name, caret, star, plus, minus, paren = mt.groups()
        if paren:
            raise PolyParseError("parentheses are not part of the term grammar", mt.start())
        if plus or minus:
            if not expect_term:
                flush(mt.start())
            if minus:
                sign = -sign
            expect_term = True
            continue
        if caret or star:
            raise PolyParseError(f"misplaced {'^' if caret else '*'}", mt.start())
        expect_term = False
        if num:
            if current_expt is not None or current_coeff is not None:
                raise PolyParseError("coefficient must precede variables", mt.start())
            current_coeff = int(num)
            # optional * after the coefficient
            mt2 = _TOKEN.match(text, pos)
            if mt2 and mt2.group(4):
                pos = mt2.end()
            continue
        if name:
            if name not in names:
                raise PolyParseError(f"unknown variable {name!r}", mt.start())
            idx = names[name]
            exp = 1
            mt2 = _TOKEN.match(text, pos)
            if mt2 and mt2.group(3):  # ^
                pos = mt2.end()
                mt3 = _TOKEN.match(text, pos)
                if not mt3 or not mt3.group(1):
                    raise PolyParseError("exponent expected after ^", pos)
                exp = int(mt3.group(1))
                pos = mt3.end()
            if current_expt is None:
                current_expt = [0] * ring.variable_count
            current_expt[idx] += exp
            mt4 = _TOKEN.match(text, pos)
            if mt4 and mt4.group(4):  # optional * between factors
                pos = mt4.end()
            continue

    if expect_term and (current_coeff is not None or current_expt is not None or sign != 1):
        raise PolyParseError("dangling sign", n)
    if current_coeff is not None or current_expt is not None:
        flush(n)
    elif expect_term and text.strip():
        raise PolyParseError("trailing operator", n)
    if not text.strip():
        raise PolyParseError("empty polynomial text", 0)
    return result


def poly_print(p: Poly, ring: "Ring") -> str:
    """Render in canonical form: descending deglex, explicit coefficients."""
    if not p:
        return "0"
    fld = ring.field
    names = _variable_names(ring.variable_count)
    pieces = []
    for m in sorted(p, key=deglex_key, reverse=True):
        c = p[m]
        factors = [
            (names[i] if e == 1 else f"{names[i]}^{e}") for i, e in enumerate(m) if e
        ]
        if not factors:
            body = fld.format(c) if not fld.is_zero(c) else "0"
        elif c == fld.one:
            body = "*".join(factors)
        else:
            body = fld.format(c) + "*" + "*".join(factors)
        pieces.append(body)
    return " + ".join(pieces).replace("+ -", "- ")


# ---------------------------------------------------------------------------
# ring specification


@dataclass(frozen=True)
class Ring:
    """The local ring k[x_1..x_v]/(relations), with k a prime field or Q.

    Power-series behaviour is modeled by degree truncation downstream; the
    relations are stored as polynomials.  dimension = variable_count - number
    of relations (the relations are assumed to form a regular sequence).
    """

    variable_count: int
    relations: Tuple[Poly, ...] = ()
    field: Field = GF32003

    def __post_init__(self):
        if self.variable_count < 1:
            raise ValueError("need at least one variable")
        object.__setattr__(self, "relations", tuple(dict(r) for r in self.relations))
        if self.dimension < 1:
            raise ValueError(
                f"dimension {self.dimension} < 1: "
                f"{self.variable_count} variables, {len(self.relations)} relations"
            )

    @property
    def dimension(self) -> int:
        return self.variable_count - len(self.relations)

    @property
    def is_hypersurface(self) -> bool:
        return len(self.relations) == 1

    @property
    def is_gorenstein(self) -> bool:
        # every ring in scope is a complete intersection, hence Gorenstein
        return True

    @property
    def variable_names(self) -> List[str]:
        return _variable_names(self.variable_count)

    def parse(self, text: str) -> Poly:
        return poly_parse(text, self)

    def show(self, p: Poly) -> str:
        return poly_print(p, self)

    def maximal_ideal_gens(self) -> List[Poly]:
        return [p_var(self.variable_count, i, self.field) for i in range(self.variable_count)]

    def cache_key(self) -> tuple:
        rel = tuple(tuple(sorted(r.items())) for r in self.relations)
        return (self.variable_count, self.field.characteristic, rel)


def make_ring(nvars: int, relation_texts: List[str], fld: Field = GF32003) -> Ring:
    """Convenience constructor: parse relation strings in the ambient ring."""
    ambient = Ring(nvars, (), fld)
    rels = tuple(poly_parse(t, ambient) for t in relation_texts)
    return Ring(nvars, rels, fld)


def validate_ring(ring: Ring) -> dict:
    """Diagnostics: dimension, order of each relation, and the quadric flag.

    Each relation must vanish at the origin to cut the ring down at the
    maximal ideal; order >= 2 keeps the embedding dimension equal to the
    variable count.  The quadric flag records order exactly 2 for every
    relation (minimal multiplicity territory for hypersurfaces).
    """
    orders = []
    problems = []
    for i, rel in enumerate(ring.relations):
        if p_is_zero(rel):
            problems.append(f"relation {i} is zero")
            orders.append(None)
            continue
        o = lowest_degree(rel)
        orders.append(o)
        if o == 0:
            problems.append(f"relation {i} has a nonzero constant term")
        elif o == 1:
            problems.append(f"relation {i} has order 1 (not inside the square of the maximal ideal)")
    return {
        "variable_count": ring.variable_count,
        "relation_count": len(ring.relations),
        "dimension": ring.dimension,
        "field_characteristic": ring.field.characteristic,
        "relation_orders": orders,
        "quadric": bool(ring.relations) and all(o == 2 for o in orders),
        "problems": problems,
        "ok": not problems,
    }
