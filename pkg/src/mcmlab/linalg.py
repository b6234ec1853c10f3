"""Exact dense linear algebra over a prime field or the rationals.

Mod-p matrices are int64 numpy arrays with entries in [0, p); all row updates
reduce mod p immediately, and p < 2^31 keeps every intermediate product inside
int64.  Rational matrices are lists of Fraction rows.  Everything here is
deterministic and exact; no floating point is ever involved.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Sequence, Tuple

import numpy as np

from .fields import Field


def as_matrix(rows: Sequence[Sequence], width: int, fld: Field):
    """Normalize a row list into the internal matrix form for the field."""
    p = fld.characteristic
    if p:
        if len(rows) == 0:
            return np.zeros((0, width), dtype=np.int64)
        return np.array([[int(x) % p for x in row] for row in rows], dtype=np.int64)
    return [[Fraction(x) for x in row] for row in rows]


def matrix_shape(mat) -> Tuple[int, int]:
    if isinstance(mat, np.ndarray):
        return mat.shape
    return (len(mat), len(mat[0]) if mat else 0)


# ---------------------------------------------------------------------------
# mod-p lane


def rref_modp(A: np.ndarray, p: int) -> Tuple[np.ndarray, List[int]]:
    """Reduced row echelon form in place; returns (matrix, pivot columns)."""
    A = A % p
    m, n = A.shape
    pivots: List[int] = []
    r = 0
    for c in range(n):
        if r == m:
            break
        nz = np.nonzero(A[r:, c])[0]
        if nz.size == 0:
            continue
        i = r + int(nz[0])
        if i != r:
            A[[r, i]] = A[[i, r]]
        inv = pow(int(A[r, c]), -1, p)
        if inv != 1:
            A[r] = (A[r] * inv) % p
        col = A[:, c].copy()
        col[r] = 0
        touched = np.nonzero(col)[0]
        if touched.size:
            A[touched] = (A[touched] - np.outer(col[touched], A[r])) % p
        pivots.append(c)
        r += 1
    return A, pivots


def nullspace_modp(A: np.ndarray, p: int) -> np.ndarray:
    """Rows of the result form a basis of {v : A v = 0} over F_p."""
    m, n = A.shape
    R, pivots = rref_modp(A.copy(), p)
    pivot_set = set(pivots)
    free_cols = [c for c in range(n) if c not in pivot_set]
    basis = np.zeros((len(free_cols), n), dtype=np.int64)
    for k, f in enumerate(free_cols):
        basis[k, f] = 1
        for r, c in enumerate(pivots):
            basis[k, c] = (-int(R[r, f])) % p
    return basis


# ---------------------------------------------------------------------------
# rational lane


def rref_frac(rows: List[List[Fraction]]) -> Tuple[List[List[Fraction]], List[int]]:
    rows = [list(r) for r in rows]
    m = len(rows)
    n = len(rows[0]) if rows else 0
    pivots: List[int] = []
    r = 0
    for c in range(n):
        if r == m:
            break
        pivot = next((i for i in range(r, m) if rows[i][c] != 0), None)
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        inv = Fraction(1) / rows[r][c]
        if inv != 1:
            rows[r] = [x * inv for x in rows[r]]
        for i in range(m):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
    return rows, pivots


def nullspace_frac(rows: List[List[Fraction]], width: int) -> List[List[Fraction]]:
    R, pivots = rref_frac(rows) if rows else ([], [])
    pivot_set = set(pivots)
    free_cols = [c for c in range(width) if c not in pivot_set]
    basis = []
    for f in free_cols:
        v = [Fraction(0)] * width
        v[f] = Fraction(1)
        for r, c in enumerate(pivots):
            v[c] = -R[r][f]
        basis.append(v)
    return basis


# ---------------------------------------------------------------------------
# field-dispatching front end


def rank(mat, fld: Field) -> int:
    p = fld.characteristic
    if p:
        if mat.shape[0] == 0 or mat.shape[1] == 0:
            return 0
        _, pivots = rref_modp(mat.copy(), p)
        return len(pivots)
    if not mat or not mat[0]:
        return 0
    _, pivots = rref_frac(mat)
    return len(pivots)


def nullspace(mat, width: int, fld: Field):
    """Basis rows of the right kernel; `width` is the number of columns."""
    p = fld.characteristic
    if p:
        if mat.shape[0] == 0:
            return np.eye(width, dtype=np.int64)
        return nullspace_modp(mat, p)
    if not mat:
        return [[Fraction(1 if i == j else 0) for j in range(width)] for i in range(width)]
    return nullspace_frac(mat, width)


def matrix_rows(mat) -> list:
    if isinstance(mat, np.ndarray):
        return [row for row in mat]
    return mat


class RowReducer:
    """Incremental row echelon store: reduce vectors against accumulated rows.

    Rows are kept fully reduced (RREF-style, pivot coefficient 1, pivots
    cleared from all stored rows), so `reduce` is idempotent and linear.
    """

    def __init__(self, width: int, fld: Field):
        self.width = width
        self.field = fld
        self.p = fld.characteristic
        self.rows = {}  # pivot column -> row

    def reduce(self, vec):
        """Return the normal form of vec modulo the stored row space."""
        if self.p:
            v = np.asarray(vec, dtype=np.int64) % self.p
            for c in sorted(self.rows):
                if v[c]:
                    v = (v - v[c] * self.rows[c]) % self.p
            return v
        v = [Fraction(x) for x in vec]
        for c in sorted(self.rows):
            if v[c] != 0:
                f = v[c]
                row = self.rows[c]
                v = [a - f * b for a, b in zip(v, row)]
        return v

    def add(self, vec) -> bool:
        """Reduce vec and insert it if nonzero; True iff the span grew."""
        v = self.reduce(vec)
        if self.p:
            nz = np.nonzero(v)[0]
            if nz.size == 0:
                return False
            c = int(nz[0])
            inv = pow(int(v[c]), -1, self.p)
            if inv != 1:
                v = (v * inv) % self.p
            for c2, row in self.rows.items():
                if row[c]:
                    self.rows[c2] = (row - row[c] * v) % self.p
            self.rows[c] = v
            return True
        c = next((i for i, x in enumerate(v) if x != 0), None)
        if c is None:
            return False
        inv = Fraction(1) / v[c]
        if inv != 1:
            v = [x * inv for x in v]
        for c2, row in list(self.rows.items()):
            if row[c] != 0:
                f = row[c]
                self.rows[c2] = [a - f * b for a, b in zip(row, v)]
        self.rows[c] = v
        return True

    def contains(self, vec) -> bool:
        v = self.reduce(vec)
        if self.p:
            return not np.any(v)
        return all(x == 0 for x in v)

    @property
    def dim(self) -> int:
        return len(self.rows)

    def pivot_columns(self) -> List[int]:
        return sorted(self.rows)


@dataclass
class LinearMap:
    """A k-linear map with its matrix acting on column vectors."""

    domain_dim: int
    codomain_dim: int
    matrix: object  # shape (codomain_dim, domain_dim)
    field: Field

    def rank(self) -> int:
        return rank(self.matrix, self.field)

    def kernel_dim(self) -> int:
        return self.domain_dim - self.rank()

    def coker_dim(self) -> int:
        return self.codomain_dim - self.rank()
