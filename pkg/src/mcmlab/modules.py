"""Module representations: cokernel presentations and matrix factorizations.

A module handle is a cokernel presentation M = coker(A^c -> A^r); rows index
generators, columns are relations.  Over a hypersurface A = Q/(f) a handle may
additionally carry a matrix factorization (phi, psi) with phi*psi = psi*phi =
f*I, in which case the free resolution is 2-periodic and every homological
computation is exact with no truncation-sufficiency concerns.

Kernels of module maps (syzygies, pullbacks) are computed by linear algebra at
a degree truncation.  Generators are accepted only when they sit well below
the truncation cap (degree headroom), since vectors near the cap can be
truncation artifacts; `TruncationInsufficient` asks the caller to raise the
level when a genuine generator gets too close to the cap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .fields import Field
from .poly import (
    Poly,
    Ring,
    constant_coeff,
    p_add,
    p_is_zero,
    p_mul,
    p_scale,
    p_sub,
    poly_key,
    poly_parse,
    total_degree,
)
from .truncate import build_truncation, coords_to_poly_vector, free_map_matrix
from .linalg import RowReducer, nullspace

Polymatrix = List[List[Poly]]


class TruncationInsufficient(RuntimeError):
    """Kernel generators touched the degree cap; retry with a higher level."""


# ---------------------------------------------------------------------------
# polynomial matrices


def pm_shape(mat: Polymatrix) -> Tuple[int, int]:
    return (len(mat), len(mat[0]) if mat else 0)


def pm_zero(rows: int, cols: int) -> Polymatrix:
    return [[{} for _ in range(cols)] for _ in range(rows)]


def pm_identity(n: int, ring: Ring) -> Polymatrix:
    one = {(0,) * ring.variable_count: ring.field.one}
    return [[dict(one) if i == j else {} for j in range(n)] for i in range(n)]


def pm_scalar(n: int, value: Poly, ring: Ring) -> Polymatrix:
    return [[dict(value) if i == j else {} for j in range(n)] for i in range(n)]


def pm_transpose(mat: Polymatrix) -> Polymatrix:
    r, c = pm_shape(mat)
    return [[mat[i][j] for i in range(r)] for j in range(c)]


def pm_mul(a: Polymatrix, b: Polymatrix, fld: Field) -> Polymatrix:
    ra, ca = pm_shape(a)
    rb, cb = pm_shape(b)
    if ca != rb:
        raise ValueError(f"shape mismatch {ra}x{ca} * {rb}x{cb}")
    out = pm_zero(ra, cb)
    for i in range(ra):
        for k in range(ca):
            if p_is_zero(a[i][k]):
                continue
            for j in range(cb):
                if b[k][j]:
                    out[i][j] = p_add(out[i][j], p_mul(a[i][k], b[k][j], fld), fld)
    return out


def pm_sub(a: Polymatrix, b: Polymatrix, fld: Field) -> Polymatrix:
    r, c = pm_shape(a)
    return [[p_sub(a[i][j], b[i][j], fld) for j in range(c)] for i in range(r)]


def pm_is_zero(mat: Polymatrix) -> bool:
    return all(p_is_zero(e) for row in mat for e in row)


def pm_block_diag(a: Polymatrix, b: Polymatrix) -> Polymatrix:
    ra, ca = pm_shape(a)
    rb, cb = pm_shape(b)
    out = pm_zero(ra + rb, ca + cb)
    for i in range(ra):
        for j in range(ca):
            out[i][j] = dict(a[i][j])
    for i in range(rb):
        for j in range(cb):
            out[ra + i][ca + j] = dict(b[i][j])
    return out


def pm_parse(ring: Ring, texts: Sequence[Sequence[str]]) -> Polymatrix:
    return [[poly_parse(t, ring) if str(t).strip() not in ("0", "") else {} for t in row]
            for row in texts]


def pm_show(ring: Ring, mat: Polymatrix) -> List[List[str]]:
    from .poly import poly_print
    return [[poly_print(e, ring) for e in row] for row in mat]


def pm_max_degree(mat: Polymatrix) -> int:
    return max((total_degree(e) for row in mat for e in row if e), default=0)


def pm_key(mat: Polymatrix) -> tuple:
    return tuple(tuple(poly_key(e) for e in row) for row in mat)


# ---------------------------------------------------------------------------
# minimalization


def minimalize_matrix(ring: Ring, mat: Polymatrix) -> Polymatrix:
    """Eliminate unit entries until none remain; the cokernel is unchanged.

    Each pivot with an invertible constant term is cleared by invertible
    row/column operations and its row and column deleted.  Constant pivots
    take the cheap path (normalize to 1, plain elimination); a unit with
    higher-order terms scales the complementary block by the unit, which is
    still an invertible operation over the local ring.
    """
    fld = ring.field
    mat = [[dict(e) for e in row] for row in mat]
    while True:
        r, c = pm_shape(mat)
        pivot = None
        for i in range(r):
            for j in range(c):
                if mat[i][j] and not fld.is_zero(constant_coeff(mat[i][j], fld)):
                    pivot = (i, j)
                    break
            if pivot:
                break
        if pivot is None:
            break
        i0, j0 = pivot
        u = mat[i0][j0]
        if total_degree(u) == 0:
            inv = fld.inv(constant_coeff(u, fld))
            row0 = [p_scale(inv, e, fld) for e in mat[i0]]
            for i in range(r):
                if i != i0 and mat[i][j0]:
                    e = mat[i][j0]
                    mat[i] = [p_sub(a, p_mul(e, b, fld), fld) for a, b in zip(mat[i], row0)]
        else:
            for i in range(r):
                if i != i0 and mat[i][j0]:
                    e = mat[i][j0]
                    mat[i] = [p_sub(p_mul(u, a, fld), p_mul(e, b, fld), fld)
                              for a, b in zip(mat[i], mat[i0])]
            for j in range(c):
                if j != j0:
                    e = mat[i0][j]
                    for i in range(r):
                        if i == i0:
                            continue
                        mat[i][j] = p_sub(p_mul(u, mat[i][j], fld),
                                          p_mul(e, mat[i][j0], fld), fld)
        mat = [[e for j, e in enumerate(row) if j != j0]
               for i, row in enumerate(mat) if i != i0]
    # trivial relations carry no information
    r, c = pm_shape(mat)
    keep = [j for j in range(c) if any(mat[i][j] for i in range(r))]
    return [[row[j] for j in keep] for row in mat]


# ---------------------------------------------------------------------------
# kernels of module maps at a certified truncation level


def module_kernel(ring: Ring, vmat: Polymatrix, target_presentation: Optional[Polymatrix] = None,
                  level: Optional[int] = None, headroom: Optional[int] = None,
                  _retries: int = 2) -> List[List[Poly]]:
    """Generators of {v in A^s : (vmat)v lies in the target's column span}.

    With no target presentation this is the syzygy module of the columns of
    vmat.  Returns a list of generator vectors (length s each), each certified
    to sit at least two degrees below the junk cutoff of the truncation.
    """
    r, s = pm_shape(vmat)
    if s == 0:
        return []
    fld = ring.field
    maxdeg = max(pm_max_degree(vmat),
                 pm_max_degree(target_presentation) if target_presentation else 0,
                 max((total_degree(rel) for rel in ring.relations), default=0))
    if headroom is None:
        headroom = max(4, maxdeg + 1)
    if level is None:
        level = max(8, 2 * maxdeg + 4)

    T = build_truncation(ring, [], level)
    dim = T.dim
    vmap = free_map_matrix(T, vmat)  # (r*dim, s*dim)
    if target_presentation and target_presentation[0]:
        tmap = free_map_matrix(T, target_presentation)
        if fld.characteristic:
            stacked = np.concatenate([vmap, tmap], axis=1)
        else:
            stacked = [row_v + row_t for row_v, row_t in zip(vmap, tmap)]
        width = s * dim + pm_shape(target_presentation)[1] * dim
    else:
        stacked = vmap
        width = s * dim

    null_rows = nullspace(stacked, width, fld)
    coord_deg = [sum(m) for m in T.basis] * s

    candidates = []
    for row in (null_rows if fld.characteristic else null_rows):
        v = row[: s * dim]
        if fld.characteristic:
            nz = np.nonzero(v)[0]
            if nz.size == 0:
                continue
            order = min(coord_deg[int(i)] for i in nz)
        else:
            nz = [i for i, x in enumerate(v) if x != 0]
            if not nz:
                continue
            order = min(coord_deg[i] for i in nz)
        candidates.append((order, v))
    candidates.sort(key=lambda t: t[0])

    cutoff = level - headroom
    span = RowReducer(s * dim, fld)
    gens: List[List[Poly]] = []
    for order, v in candidates:
        if order > cutoff:
            continue  # cap-adjacent vectors may be truncation artifacts
        if span.contains(v):
            continue
        if order > cutoff - 2:
            if _retries > 0:
                return module_kernel(ring, vmat, target_presentation,
                                     level + headroom + 2, headroom, _retries - 1)
            raise TruncationInsufficient(
                f"kernel generator of order {order} touches the cap (level {level})")
        polyvec = coords_to_poly_vector(T, v, s)
        gens.append(polyvec)
        block = free_map_matrix(T, [[p] for p in polyvec])  # (s*dim, dim)
        if fld.characteristic:
            for col in block.T:
                span.add(col)
        else:
            for jcol in range(dim):
                span.add([block[i][jcol] for i in range(s * dim)])
    return gens


def syzygy_generators(ring: Ring, pres: Polymatrix) -> Polymatrix:
    """Matrix whose columns generate the kernel of A^c -> A^r given by pres."""
    r, c = pm_shape(pres)
    gens = module_kernel(ring, pres)
    return [[gens[j][i] for j in range(len(gens))] for i in range(c)]


# ---------------------------------------------------------------------------
# matrix factorizations


@dataclass
class MatrixFactorization:
    phi: Polymatrix
    psi: Polymatrix
    f: Poly

    @property
    def size(self) -> int:
        return len(self.phi)


def mf_validate(ring: Ring, mf: MatrixFactorization) -> dict:
    """Exact check phi*psi = psi*phi = f*I over the ambient polynomial ring."""
    fld = ring.field
    n = mf.size
    report = {"ok": True, "size": n, "failures": []}
    for a, b, tag in ((mf.phi, mf.psi, "phi*psi"), (mf.psi, mf.phi, "psi*phi")):
        if pm_shape(a) != (n, n) or pm_shape(b) != (n, n):
            report["ok"] = False
            report["failures"].append(f"{tag}: matrices must be square of equal size")
            continue
        prod = pm_mul(a, b, fld)
        expect = pm_scalar(n, mf.f, ring)
        diff = pm_sub(prod, expect, fld)
        for i in range(n):
            for j in range(n):
                if diff[i][j]:
                    report["ok"] = False
                    report["failures"].append(f"{tag} entry ({i},{j}) differs from f*I")
    return report


# ---------------------------------------------------------------------------
# the module handle


class Module:
    """Handle for a finitely presented module, MF-backed when possible."""

    def __init__(self, ring: Ring, presentation: Polymatrix, rows: int,
                 mf: Optional[MatrixFactorization] = None, mcm_asserted: bool = False,
                 label: str = ""):
        self.ring = ring
        self.presentation = presentation
        self.rows = rows  # generator count of the stored presentation
        self.mf = mf
        self.mcm_asserted = mcm_asserted
        self.label = label
        self._cache: dict = {}

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_presentation(cls, ring: Ring, mat: Polymatrix, mcm_asserted: bool = False,
                          label: str = "") -> "Module":
        rows = len(mat)
        mat = [[dict(e) for e in row] for row in mat]
        return cls(ring, mat, rows, None, mcm_asserted, label)

    @classmethod
    def from_mf(cls, ring: Ring, phi: Polymatrix, psi: Polymatrix,
                label: str = "") -> "Module":
        if not ring.is_hypersurface:
            raise ValueError("matrix factorizations require a hypersurface ring")
        mf = MatrixFactorization(phi, psi, ring.relations[0])
        rep = mf_validate(ring, mf)
        if not rep["ok"]:
            raise ValueError("invalid matrix factorization: " + "; ".join(rep["failures"]))
        fld = ring.field
        for mat in (phi, psi):
            for row in mat:
                for e in row:
                    if e and not fld.is_zero(constant_coeff(e, fld)):
                        raise ValueError(
                            "matrix factorization has a unit entry; "
                            "split off the trivial block first")
        return cls(ring, [[dict(e) for e in row] for row in phi], len(phi), mf,
                   mcm_asserted=True, label=label)

    @classmethod
    def free(cls, ring: Ring, rank: int, label: str = "") -> "Module":
        return cls(ring, [[] for _ in range(rank)], rank, None, True,
                   label or f"free rank {rank}")

    @classmethod
    def zero(cls, ring: Ring) -> "Module":
        return cls.free(ring, 0, "zero module")

    # -- basics ------------------------------------------------------------

    @property
    def generator_count(self) -> int:
        return self.rows

    def key(self) -> tuple:
        return (self.ring.cache_key(), self.rows, pm_key(self.presentation))

    def minimal_presentation(self) -> Polymatrix:
        got = self._cache.get("minimal")
        if got is None:
            got = minimalize_matrix(self.ring, self.presentation)
            self._cache["minimal"] = got
        return got

    @property
    def mu(self) -> int:
        """Minimal number of generators."""
        return len(self.minimal_presentation())

    def is_zero(self) -> bool:
        return self.mu == 0

    def is_free(self) -> bool:
        mini = self.minimal_presentation()
        return pm_is_zero(mini) or pm_shape(mini)[1] == 0

    def free_summand_split(self) -> Tuple["Module", int]:
        """Maximal free summand: M = L + free, L keeps the nonzero rows."""
        mini = self.minimal_presentation()
        r, c = pm_shape(mini)
        zero_rows = [i for i in range(r) if all(p_is_zero(e) for e in mini[i])]
        live = [i for i in range(r) if i not in zero_rows]
        lmat = [mini[i] for i in live]
        keep = [j for j in range(c) if any(lmat[i][j] for i in range(len(live)))] if live else []
        lmat = [[row[j] for j in keep] for row in lmat]
        L = Module.from_presentation(self.ring, lmat, self.mcm_asserted,
                                     (self.label + " (non-free part)").strip())
        return L, len(zero_rows)

    # -- resolutions -------------------------------------------------------

    def resolution_differential(self, i: int) -> Polymatrix:
        """d_i of a free resolution; d_1 is the stored presentation."""
        if i < 1:
            raise ValueError("differential index must be >= 1")
        if self.mf is not None:
            # ... -> A^n --psi--> A^n --phi--> A^n -> M -> 0
            return self.mf.phi if i % 2 == 1 else self.mf.psi
        diffs = self._cache.setdefault("differentials", [self.presentation])
        while len(diffs) < i:
            prev = diffs[-1]
            if not prev or pm_shape(prev)[1] == 0:
                diffs.append([])  # resolution already ended
                continue
            diffs.append(syzygy_generators(self.ring, prev))
        return diffs[i - 1]

    def syzygy(self, i: int = 1) -> "Module":
        """The i-th syzygy module w.r.t. a minimal resolution."""
        if i < 0:
            raise ValueError("syzygy index must be >= 0")
        if i == 0:
            return self
        if self.is_free():
            return Module.zero(self.ring)
        if self.mf is not None:
            phi, psi = self.mf.phi, self.mf.psi
            if i % 2 == 1:
                phi, psi = psi, phi
            return Module.from_mf(self.ring, phi, psi,
                                  label=f"syz^{i}({self.label})" if self.label else "")
        cached = self._cache.get(("syzygy", i))
        if cached is not None:
            return cached
        if i > 1:
            out = self.syzygy(i - 1).syzygy(1)
        else:
            L, _free_rank = self.free_summand_split()
            mini = L.minimal_presentation()
            if not mini or pm_shape(mini)[1] == 0:
                out = Module.zero(self.ring)
            else:
                relations = syzygy_generators(self.ring, mini)
                out = Module.from_presentation(
                    self.ring, relations, self.mcm_asserted,
                    label=f"syz({self.label})" if self.label else "")
        self._cache[("syzygy", i)] = out
        return out

    def __repr__(self):
        r, c = pm_shape(self.presentation)
        tag = "mf" if self.mf is not None else "pres"
        name = f" {self.label!r}" if self.label else ""
        return f"<Module{name} {tag} {r}x{c} over {self.ring.variable_count} vars>"


def direct_sum(a: Module, b: Module) -> Module:
    if a.ring is not b.ring and a.ring.cache_key() != b.ring.cache_key():
        raise ValueError("direct sum requires modules over the same ring")
    label = f"{a.label}+{b.label}" if a.label and b.label else ""
    if a.mf is not None and b.mf is not None:
        return Module.from_mf(a.ring,
                              pm_block_diag(a.mf.phi, b.mf.phi),
                              pm_block_diag(a.mf.psi, b.mf.psi), label)
    return Module(a.ring, pm_block_diag(a.presentation, b.presentation),
                  a.rows + b.rows, None,
                  a.mcm_asserted and b.mcm_asserted, label)


# ---------------------------------------------------------------------------
# Betti numbers and complexity


@dataclass
class BettiTable:
    window: Tuple[int, int]
    values: Dict[int, int]


def betti_numbers(m: Module, window: Tuple[int, int]) -> BettiTable:
    """beta_n = minimal generator count of the n-th syzygy."""
    lo, hi = window
    if lo < 0:
        raise ValueError("window must start at 0 or later")
    values: Dict[int, int] = {}
    if m.mf is not None:
        L, free_rank = m.free_summand_split()
        size = m.mf.size
        for n in range(lo, hi + 1):
            values[n] = m.mu if n == 0 else size
        return BettiTable(window, values)
    current = m
    for n in range(0, hi + 1):
        if n >= lo:
            values[n] = current.mu
        if n < hi:
            current = current.syzygy(1)
    return BettiTable(window, values)


def complexity_estimate(table: BettiTable) -> int:
    """1 + degree of the eventual polynomial of the Betti numbers.

    0 for eventually-zero tables (finite projective dimension), 1 for bounded
    nonzero growth, 2 for linear growth, and so on.
    """
    from .fitting import WindowTooShort, fit_integer_table
    lo, hi = table.window
    if hi - lo + 1 < 6:
        raise ValueError("complexity needs a Betti window of length >= 6")
    try:
        fit = fit_integer_table(table.values)
    except WindowTooShort as exc:
        raise WindowTooShort(f"no polynomial tail in window {table.window}") from exc
    return 1 + fit.degree if fit.degree >= 0 else 0


# ---------------------------------------------------------------------------
# Ulrich test (needs Hilbert coefficients; import kept local to avoid a cycle)


def is_ulrich(m: Module, filtration) -> dict:
    """Ulrich means the minimal generator count equals the multiplicity e0."""
    from .filtration import hilbert_coefficients
    coeffs = hilbert_coefficients(m, filtration)
    e0 = coeffs[0]
    e1 = coeffs[1] if len(coeffs) > 1 else 0
    return {"mu": m.mu, "e0": e0, "e1": e1, "ulrich": m.mu == e0}
