"""Finite-dimensional truncations A/(J + m^(n+1)) with exact normal forms.

Every length and rank in the library bottoms out here.  A truncation is built
by spanning the ideal image inside the space of all monomials of degree <= n
(listing the monomial multiples of each generator that survive truncation) and
row-reducing; the surviving standard monomials form the basis, and the echelon
rows give a linear, idempotent reducer.

`stable_quotient` layers a certificate on top: if the dimension is unchanged
from level L to L+1, the quotient map between the two truncations is an
isomorphism, so m^(L+1) lies inside the ideal and the level-L model computes
the honest quotient A/J exactly (Krull intersection in the local ring).
"""

from __future__ import annotations

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .fields import Field
from .linalg import LinearMap, as_matrix, rref_frac, rref_modp
from .poly import (
    Mono,
    Poly,
    Ring,
    lowest_degree,
    mono_mul,
    monomials_up_to,
    p_is_zero,
    p_mono_shift,
    p_truncate,
    poly_key,
)

DEFAULT_DIM_CAP = 200_000


class DimensionCapExceeded(RuntimeError):
    pass


class QuotientNotFinite(RuntimeError):
    """The ideal is not m-primary at the probed levels; lengths keep growing."""


class TruncatedAlgebra:
    """Vector-space model of A/(relations + extra_gens + m^(level+1))."""

    def __init__(self, ring: Ring, extra_gens: Sequence[Poly], level: int,
                 cap_dim: int = DEFAULT_DIM_CAP):
        if level < 0:
            raise ValueError("level must be >= 0")
        self.ring = ring
        self.level = level
        self.extra_gens = [dict(g) for g in extra_gens if not p_is_zero(g)]
        fld = ring.field
        self.field = fld

        ambient = monomials_up_to(ring.variable_count, level)
        if len(ambient) > cap_dim:
            raise DimensionCapExceeded(
                f"ambient dimension {len(ambient)} exceeds cap {cap_dim}")
        self.ambient = ambient
        self.ambient_index: Dict[Mono, int] = {m: i for i, m in enumerate(ambient)}

        rows = []
        gens = list(ring.relations) + self.extra_gens
        for g in gens:
            ordg = lowest_degree(g)
            for u in monomials_up_to(ring.variable_count, max(level - ordg, -1)):
                shifted = p_truncate(p_mono_shift(u, g), level)
                if shifted:
                    rows.append(self._ambient_vector(shifted))
        self._pivot_rows: Dict[int, object] = {}
        if rows:
            if fld.characteristic:
                R, pivots = rref_modp(np.array(rows, dtype=np.int64), fld.characteristic)
                for r, c in enumerate(pivots):
                    self._pivot_rows[c] = R[r]
            else:
                R, pivots = rref_frac(as_matrix(rows, len(ambient), fld))
                for r, c in enumerate(pivots):
                    self._pivot_rows[c] = R[r]
        pivot_set = set(self._pivot_rows)
        self.basis: List[Mono] = [m for i, m in enumerate(ambient) if i not in pivot_set]
        self.basis_index: Dict[Mono, int] = {m: i for i, m in enumerate(self.basis)}
        self._basis_cols = np.array(
            [i for i in range(len(ambient)) if i not in pivot_set], dtype=np.intp)
        self._mult_cache: Dict[tuple, object] = {}

    @property
    def dim(self) -> int:
        return len(self.basis)

    def _ambient_vector(self, p: Poly):
        fld = self.field
        if fld.characteristic:
            v = np.zeros(len(self.ambient), dtype=np.int64)
            for m, c in p.items():
                v[self.ambient_index[m]] = int(c) % fld.characteristic
            return v
        from fractions import Fraction
        v = [Fraction(0)] * len(self.ambient)
        for m, c in p.items():
            v[self.ambient_index[m]] = c
        return v

    def reduce_to_ambient(self, p: Poly):
        """Normal form of p as a coefficient vector over all ambient monomials."""
        fld = self.field
        v = self._ambient_vector(p_truncate(p, self.level))
        if fld.characteristic:
            pp = fld.characteristic
            for c in sorted(self._pivot_rows):
                if v[c]:
                    v = (v - v[c] * self._pivot_rows[c]) % pp
            return v
        for c in sorted(self._pivot_rows):
            if v[c] != 0:
                f = v[c]
                row = self._pivot_rows[c]
                v = [a - f * b for a, b in zip(v, row)]
        return v

    def reduce(self, p: Poly):
        """Normal form of p as a coefficient vector over the standard-monomial basis."""
        v = self.reduce_to_ambient(p)
        if self.field.characteristic:
            return v[self._basis_cols]
        return [v[i] for i in self._basis_cols]

    def reduce_poly(self, p: Poly) -> Poly:
        """Normal form of p as a polynomial supported on basis monomials."""
        v = self.reduce(p)
        fld = self.field
        out: Poly = {}
        for i, m in enumerate(self.basis):
            c = v[i]
            if not fld.is_zero(c):
                out[m] = fld.of(int(c)) if fld.characteristic else c
        return out

    def vector_to_poly(self, v) -> Poly:
        fld = self.field
        out: Poly = {}
        for i, m in enumerate(self.basis):
            c = v[i]
            if not fld.is_zero(c):
                out[m] = fld.of(int(c)) if fld.characteristic else c
        return out

    def mult_matrix(self, a: Poly):
        """Matrix of multiplication by a on the basis (columns = images)."""
        key = poly_key(a)
        cached = self._mult_cache.get(key)
        if cached is not None:
            return cached
        fld = self.field
        n = self.dim
        if fld.characteristic:
            mat = np.zeros((n, n), dtype=np.int64)
            for j, b in enumerate(self.basis):
                col = self.reduce(p_mono_shift(b, a))
                mat[:, j] = col
        else:
            from fractions import Fraction
            mat = [[Fraction(0)] * n for _ in range(n)]
            for j, b in enumerate(self.basis):
                col = self.reduce(p_mono_shift(b, a))
                for i in range(n):
                    mat[i][j] = col[i]
        self._mult_cache[key] = mat
        return mat

    def mult_map(self, a: Poly) -> LinearMap:
        return LinearMap(self.dim, self.dim, self.mult_matrix(a), self.field)

    def cache_key(self) -> tuple:
        return (self.ring.cache_key(),
                tuple(sorted(poly_key(g) for g in self.extra_gens)),
                self.level)


def build_truncation(ring: Ring, extra_gens: Sequence[Poly], level: int,
                     cap_dim: int = DEFAULT_DIM_CAP) -> TruncatedAlgebra:
    """Model A/(relations + extra_gens + m^(level+1)) as a k-vector space."""
    return _truncation_cached(ring, extra_gens, level, cap_dim)


_TRUNC_CACHE: Dict[tuple, TruncatedAlgebra] = {}


def _truncation_cached(ring, extra_gens, level, cap_dim):
    key = (ring.cache_key(),
           tuple(sorted(poly_key(dict(g)) for g in extra_gens if g)),
           level)
    alg = _TRUNC_CACHE.get(key)
    if alg is None:
        alg = TruncatedAlgebra(ring, extra_gens, level, cap_dim)
        if len(_TRUNC_CACHE) > 512:
            _TRUNC_CACHE.clear()
        _TRUNC_CACHE[key] = alg
    return alg


def stable_quotient(ring: Ring, ideal_gens: Sequence[Poly], start_level: int = 1,
                    max_level: int = 64, cap_dim: int = DEFAULT_DIM_CAP) -> TruncatedAlgebra:
    """Exact model of A/(ideal_gens): raise the truncation level until the
    dimension stops moving, which certifies m^(L+1) is inside the ideal."""
    prev: Optional[TruncatedAlgebra] = None
    level = max(start_level, 1)
    # generators of degree D force probing at least to D
    degrees = [lowest_degree(g) for g in ideal_gens if not p_is_zero(g)]
    if degrees:
        level = max(level, max(degrees))
    while level <= max_level:
        cur = build_truncation(ring, ideal_gens, level, cap_dim)
        if prev is not None and cur.dim == prev.dim:
            return prev
        prev = cur
        level += 1
    raise QuotientNotFinite(
        f"quotient dimension still growing at level {max_level}; ideal not m-primary?")


def module_length(T: TruncatedAlgebra, presentation_matrix: Optional[List[List[Poly]]],
                  generator_count: int) -> int:
    """Length of (coker of the presentation) tensored with T.

    With no relations this is generator_count * dim(T); otherwise subtract the
    rank of the presentation acting on T-coordinates.
    """
    if not presentation_matrix or not presentation_matrix[0]:
        return generator_count * T.dim
    mat = free_map_matrix(T, presentation_matrix)
    from .linalg import rank
    return generator_count * T.dim - rank(mat, T.field)


def free_map_matrix(T: TruncatedAlgebra, polymatrix: List[List[Poly]]):
    """Matrix of the map T^c -> T^r induced by an r x c matrix over the ring.

    Coordinates are flattened as (generator index) * dim + (basis index).
    """
    rows = len(polymatrix)
    cols = len(polymatrix[0]) if rows else 0
    n = T.dim
    fld = T.field
    if fld.characteristic:
        out = np.zeros((rows * n, cols * n), dtype=np.int64)
        for i in range(rows):
            for j in range(cols):
                entry = polymatrix[i][j]
                if entry:
                    out[i * n:(i + 1) * n, j * n:(j + 1) * n] = T.mult_matrix(entry)
        return out
    from fractions import Fraction
    out = [[Fraction(0)] * (cols * n) for _ in range(rows * n)]
    for i in range(rows):
        for j in range(cols):
            entry = polymatrix[i][j]
            if entry:
                block = T.mult_matrix(entry)
                for a in range(n):
                    for b in range(n):
                        out[i * n + a][j * n + b] = block[a][b]
    return out


def poly_vector_coords(T: TruncatedAlgebra, vec: Sequence[Poly]):
    """Flattened T-coordinates of a vector of ring elements."""
    fld = T.field
    n = T.dim
    if fld.characteristic:
        out = np.zeros(len(vec) * n, dtype=np.int64)
        for i, p in enumerate(vec):
            if p:
                out[i * n:(i + 1) * n] = T.reduce(p)
        return out
    from fractions import Fraction
    out = [Fraction(0)] * (len(vec) * n)
    for i, p in enumerate(vec):
        if p:
            red = T.reduce(p)
            for j in range(n):
                out[i * n + j] = red[j]
    return out


def coords_to_poly_vector(T: TruncatedAlgebra, coords, r: int) -> List[Poly]:
    """Lift flattened T-coordinates back to a polynomial vector of length r."""
    n = T.dim
    return [T.vector_to_poly(coords[i * n:(i + 1) * n]) for i in range(r)]
