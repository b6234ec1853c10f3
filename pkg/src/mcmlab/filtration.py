"""Admissible filtrations, Hilbert functions, and monomial integral closures.

Three filtration kinds are supported: the I-adic filtration F_n = I^n, the
integral-closure filtration of a monomial ideal (computed exactly through the
Newton polyhedron: the closure of I^n is spanned by the monomials whose
exponent vectors lie in n times the polyhedron of I), and custom tables with
an adic tail.  All lengths are computed in certified truncations, so every
Hilbert value is an exact integer.

Integral closure is implemented only for monomial ideals in the ambient
polynomial variables; over a quotient ring the image of that closure is used
as a surrogate, which every report flags.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from math import gcd
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .fields import Field
from .fitting import PolyFit, WindowTooShort, binomial_poly, factorial, fit_integer_table
from .linalg import RowReducer, nullspace
from .modules import Module, Polymatrix
from .poly import (
    Mono,
    Poly,
    Ring,
    lowest_degree,
    mono_divides,
    monomials_up_to,
    p_is_zero,
    p_mul,
    poly_key,
    total_degree,
)
from .truncate import (
    DEFAULT_DIM_CAP,
    TruncatedAlgebra,
    build_truncation,
    free_map_matrix,
    module_length,
    poly_vector_coords,
    stable_quotient,
)


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("MCMLAB_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# filtration specifications


@dataclass(frozen=True)
class FiltrationSpec:
    """F_n chain of ideals: adic powers, monomial integral closures, or a
    custom generator table with an adic tail F_n = I*F_{n-1} past the
    stabilization index."""

    ring: Ring
    kind: str  # "adic" | "integral-closure" | "custom"
    ideal: Tuple[Poly, ...]
    custom_table: Tuple[Tuple[Poly, ...], ...] = ()  # entry t is F_{t+1}
    custom_stab: int = 0

    def __post_init__(self):
        if self.kind not in ("adic", "integral-closure", "custom"):
            raise ValueError(f"unknown filtration kind {self.kind!r}")
        object.__setattr__(self, "ideal", tuple(dict(g) for g in self.ideal))
        if self.kind == "integral-closure":
            exps = monomial_exponents(self.ideal)
            if exps is None:
                raise ValueError("integral-closure filtrations need a monomial ideal")
        if not self.ideal:
            raise ValueError("filtration needs a nonempty ideal")

    def cache_key(self) -> tuple:
        return (self.ring.cache_key(), self.kind,
                tuple(sorted(poly_key(g) for g in self.ideal)),
                tuple(tuple(sorted(poly_key(g) for g in row)) for row in self.custom_table),
                self.custom_stab)


def madic(ring: Ring) -> FiltrationSpec:
    """The maximal-ideal-adic filtration."""
    return FiltrationSpec(ring, "adic", tuple(ring.maximal_ideal_gens()))


def monomial_exponents(gens: Sequence[Poly]) -> Optional[List[Mono]]:
    """Exponent vectors if every generator is a single term, else None."""
    out = []
    for g in gens:
        if len(g) != 1:
            return None
        out.append(next(iter(g)))
    return out


# ---------------------------------------------------------------------------
# Newton polyhedron membership (exact Fourier-Motzkin feasibility)


def _fm_feasible(constraints: List[Tuple[List[Fraction], Fraction]], nvars: int) -> bool:
    """Feasibility of {x : sum c_i x_i <= rhs for each constraint} over Q."""
    cons = [(list(c), Fraction(r)) for c, r in constraints]
    for v in range(nvars):
        pos, neg, rest = [], [], []
        for c, r in cons:
            if c[v] > 0:
                pos.append((c, r))
            elif c[v] < 0:
                neg.append((c, r))
            else:
                rest.append((c, r))
        new = rest
        for cp, rp in pos:
            for cn, rn in neg:
                # scale so the v coefficients cancel
                a, b = cp[v], -cn[v]
                comb = [b * x + a * y for x, y in zip(cp, cn)]
                new.append((comb, b * rp + a * rn))
        cons = new
    return all(r >= 0 for _, r in cons)


def newton_member(b: Mono, exps: List[Mono], n: int) -> bool:
    """Is b inside n * (Newton polyhedron of the monomial ideal)?

    Membership means b >= sum lambda_i a_i componentwise for some nonnegative
    rationals with sum lambda_i = n; this is exactly integrality of x^b over
    the n-th power of the ideal.
    """
    if n == 0:
        return True
    s = len(exps)
    v = len(b)
    last = exps[-1]
    # substitute lambda_s = n - (lambda_1 + ... + lambda_{s-1})
    cons: List[Tuple[List[Fraction], Fraction]] = []
    for i in range(s - 1):  # lambda_i >= 0
        c = [Fraction(0)] * (s - 1)
        c[i] = Fraction(-1)
        cons.append((c, Fraction(0)))
    cons.append(([Fraction(1)] * (s - 1), Fraction(n)))  # lambda_s >= 0
    for j in range(v):
        c = [Fraction(exps[i][j] - last[j]) for i in range(s - 1)]
        cons.append((c, Fraction(b[j] - n * last[j])))
    return _fm_feasible(cons, s - 1)


def _minimalize_monomials(monos: List[Mono]) -> List[Mono]:
    keep: List[Mono] = []
    for m in sorted(monos, key=lambda t: (sum(t), t)):
        if not any(mono_divides(k, m) for k in keep):
            keep.append(m)
    return keep


def integral_closure_gens(exps: List[Mono], n: int) -> List[Mono]:
    """Minimal monomial generators of the integral closure of the n-th power."""
    if n == 0:
        return [(0,) * len(exps[0])]
    v = len(exps[0])
    box = [n * max(e[j] for e in exps) for j in range(v)]
    hits = []
    for b in itertools.product(*(range(bound + 1) for bound in box)):
        if newton_member(b, exps, n):
            hits.append(tuple(b))
    return _minimalize_monomials(hits)


# ---------------------------------------------------------------------------
# filtration generators


def filtration_gens(F: FiltrationSpec, n: int) -> List[Poly]:
    """Generators of F_n (the unit ideal for n <= 0)."""
    fld = F.ring.field
    one = {(0,) * F.ring.variable_count: fld.one}
    if n <= 0:
        return [one]
    if F.kind == "adic":
        return _adic_power(F.ring, F.ideal, n)
    if F.kind == "integral-closure":
        exps = monomial_exponents(F.ideal)
        gens = integral_closure_gens(exps, n)
        return [{m: fld.one} for m in gens]
    # custom: explicit table, then an adic tail
    if n <= len(F.custom_table):
        return [dict(g) for g in F.custom_table[n - 1]]
    if n <= F.custom_stab:
        raise ValueError(f"custom filtration table does not cover n={n}")
    prev = filtration_gens(F, n - 1)
    out = {}
    for a in F.ideal:
        for b in prev:
            prod = p_mul(a, b, fld)
            if prod:
                out[poly_key(prod)] = prod
    return list(out.values())


def _adic_power(ring: Ring, gens: Sequence[Poly], n: int) -> List[Poly]:
    fld = ring.field
    out: Dict[tuple, Poly] = {}
    for combo in itertools.combinations_with_replacement(range(len(gens)), n):
        prod = {(0,) * ring.variable_count: fld.one}
        for i in combo:
            prod = p_mul(prod, gens[i], fld)
        if prod:
            out[poly_key(prod)] = prod
    return list(out.values())


# ---------------------------------------------------------------------------
# lengths, Hilbert tables, fits, coefficients


@dataclass
class HilbertTable:
    window: Tuple[int, int]
    values: Dict[int, int]


_ALG_CACHE: Dict[tuple, TruncatedAlgebra] = {}


def filtration_quotient(F: FiltrationSpec, n: int, cap_dim: int = DEFAULT_DIM_CAP) -> TruncatedAlgebra:
    """Certified finite model of A/F_{n+1}."""
    key = (F.cache_key(), n)
    alg = _ALG_CACHE.get(key)
    if alg is None:
        gens = filtration_gens(F, n + 1)
        start = max((lowest_degree(g) for g in gens if g), default=1)
        alg = stable_quotient(F.ring, gens, start_level=start, cap_dim=cap_dim)
        if len(_ALG_CACHE) > 256:
            _ALG_CACHE.clear()
        _ALG_CACHE[key] = alg
    return alg


def module_filtration_length(M: Module, F: FiltrationSpec, n: int,
                             cap_dim: int = DEFAULT_DIM_CAP) -> int:
    """Exact length of M / F_{n+1} M."""
    T = filtration_quotient(F, n, cap_dim)
    return module_length(T, M.presentation, M.generator_count)


def hilbert_table(M: Module, F: FiltrationSpec, window: Tuple[int, int],
                  cap_dim: int = DEFAULT_DIM_CAP) -> HilbertTable:
    """n -> length of M/F_{n+1}M on the window, exactly."""
    lo, hi = window
    if lo < 0:
        raise ValueError("Hilbert window must start at n >= 0")
    ns = list(range(lo, hi + 1))
    workers = thread_count()
    if workers > 1 and len(ns) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vals = list(pool.map(lambda n: module_filtration_length(M, F, n, cap_dim), ns))
        values = dict(zip(ns, vals))
    else:
        values = {n: module_filtration_length(M, F, n, cap_dim) for n in ns}
    return HilbertTable(window, values)


def fit_hilbert(table: HilbertTable) -> PolyFit:
    """Exact Newton-forward-difference fit of the table tail."""
    return fit_integer_table(table.values)


def auto_fit(M: Module, F: FiltrationSpec, degree_bound: int,
             cap: int = 64) -> Tuple[HilbertTable, PolyFit]:
    """Grow the window until the fit stabilizes (differences vanish 3x)."""
    d = degree_bound
    hi = max(2 * d + 8, 6)
    table = hilbert_table(M, F, (0, hi))
    while True:
        try:
            return table, fit_hilbert(table)
        except WindowTooShort:
            if hi >= cap:
                raise
            new_hi = min(2 * hi, cap)
            extra = hilbert_table(M, F, (hi + 1, new_hi))
            table.values.update(extra.values)
            table.window = (0, new_hi)
            hi = new_hi


def hilbert_coefficients(M: Module, F: FiltrationSpec,
                         window: Optional[Tuple[int, int]] = None) -> Tuple[int, ...]:
    """Exact integers (e_0, ..., e_r) in the binomial-basis expansion
    P(n) = sum (-1)^i e_i C(n+r-i, r-i) of the Hilbert polynomial."""
    if M.is_zero():
        return (0,)
    if window is not None:
        fit = fit_hilbert(hilbert_table(M, F, window))
    else:
        _, fit = auto_fit(M, F, M.ring.dimension)
    return _binomial_expansion(fit)


def _binomial_expansion(fit: PolyFit) -> Tuple[int, ...]:
    r = fit.degree
    if r < 0:
        return (0,)
    rem = list(fit.coefficients) + [Fraction(0)]
    out = []
    for i in range(r + 1):
        k = r - i
        lead = rem[k] if k < len(rem) else Fraction(0)
        e_signed = lead * factorial(k)
        e = (-1) ** i * e_signed
        if e.denominator != 1:
            raise ArithmeticError(f"non-integer Hilbert coefficient {e}")
        out.append(int(e))
        term = binomial_poly(k - i, k)  # C(n + r - i, r - i) with r-i = k
        for j, c in enumerate(term):
            rem[j] -= e_signed * c
    if any(c != 0 for c in rem):
        raise ArithmeticError("binomial expansion left a nonzero remainder")
    return tuple(out)


# ---------------------------------------------------------------------------
# admissibility checks (finite certificates at a truncation level)


def _membership(ring: Ring, element: Poly, ideal_gens: Sequence[Poly], level: int) -> bool:
    """Does the element lie in the ideal, modulo m^(level+1)?"""
    if p_is_zero(element):
        return True
    T = build_truncation(ring, list(ideal_gens), level)
    v = T.reduce(element)
    if ring.field.characteristic:
        return not np.any(v)
    return all(x == 0 for x in v)


def check_admissible(F: FiltrationSpec, level: int = 6) -> dict:
    """Verify the admissibility axioms inside truncations up to `level`.

    Axiom 1: I^n inside F_n.  Axiom 2: F_n * F_m inside F_{n+m}.  Axiom 3:
    F_n = I*F_{n-1} from some index on (the observed stabilization is
    reported).  These are finite certificates, not proofs for all n.
    """
    ring = F.ring
    gens_cache = {n: filtration_gens(F, n) for n in range(level + 1)}
    report = {"level": level, "axioms": {}, "ok": True,
              "surrogate_note": ("integral closure computed in the ambient "
                                 "polynomial variables; quotient-ring closure is "
                                 "approximated by its image")
              if F.kind == "integral-closure" and ring.relations else None}

    failures = []
    for n in range(1, level + 1):
        for g in _adic_power(ring, F.ideal, n):
            lvl = max(total_degree(g), max((total_degree(h) for h in gens_cache[n]), default=1)) + 2
            if not _membership(ring, g, gens_cache[n], lvl):
                failures.append({"n": n, "witness": g})
    report["axioms"]["ideal_powers_inside"] = {"ok": not failures, "failures": failures[:3]}

    failures = []
    for n in range(1, level + 1):
        for m in range(1, level + 1 - n):
            for a in gens_cache[n]:
                for b in gens_cache[m]:
                    prod = p_mul(a, b, ring.field)
                    if p_is_zero(prod):
                        continue
                    lvl = max(total_degree(prod),
                              max((total_degree(h) for h in gens_cache[n + m]), default=1)) + 2
                    if not _membership(ring, prod, gens_cache[n + m], lvl):
                        failures.append({"n": n, "m": m, "witness": prod})
    report["axioms"]["multiplicative"] = {"ok": not failures, "failures": failures[:3]}

    stab = None
    failures = []
    for n in range(2, level + 1):
        prev = gens_cache[n - 1]
        tail = []
        for a in F.ideal:
            for b in prev:
                prod = p_mul(a, b, ring.field)
                if prod:
                    tail.append(prod)
        lvl = max((total_degree(g) for g in gens_cache[n] + tail), default=1) + 2
        forward = all(_membership(ring, g, tail, lvl) for g in gens_cache[n])
        backward = all(_membership(ring, g, gens_cache[n], lvl) for g in tail)
        if forward and backward:
            if stab is None:
                stab = n
        else:
            stab = None
            if n == level:
                failures.append({"n": n, "forward": forward, "backward": backward})
    declared = F.custom_stab if F.kind == "custom" else None
    report["axioms"]["adic_tail"] = {
        "ok": stab is not None or level < 2,
        "observed_stabilization": stab,
        "declared_stabilization": declared,
        "failures": failures,
    }
    report["ok"] = all(a["ok"] for a in report["axioms"].values())
    return report


# ---------------------------------------------------------------------------
# the two-variable closure-sum identity for (I, X)^n


def check_intclosum(ring: Ring, ideal_gens: Sequence[Poly], n: int) -> dict:
    """Verify closure((I,X)^n) = sum_i closure(I^(n-i)) X^i as monomial sets.

    Both sides are computed independently through Newton polyhedra: the left
    side in the extended variable list with a fresh X, the right side from the
    closures of the powers of I.  Equality of minimal generator sets is exact.
    """
    exps = monomial_exponents(ideal_gens)
    if exps is None:
        raise ValueError("check_intclosum needs a monomial ideal")
    v = ring.variable_count
    ext = [e + (0,) for e in exps] + [(0,) * v + (1,)]
    lhs = integral_closure_gens(ext, n) if n > 0 else [(0,) * (v + 1)]

    rhs_all: List[Mono] = []
    for i in range(n + 1):
        for m in integral_closure_gens(exps, n - i):
            rhs_all.append(m + (i,))
    rhs = _minimalize_monomials(rhs_all)
    return {
        "n": n,
        "equal": sorted(lhs) == sorted(rhs),
        "lhs_gens": sorted(lhs),
        "rhs_gens": sorted(rhs),
    }


# ---------------------------------------------------------------------------
# superficial elements


def _span_rows(T: TruncatedAlgebra, vectors: List[List[Poly]], r: int):
    """RREF rows of the A-submodule of T^r generated by the given vectors."""
    fld = T.field
    red = RowReducer(r * T.dim, fld)
    if vectors:
        cols_matrix = [[vec[i] for vec in vectors] for i in range(r)]
        block = free_map_matrix(T, cols_matrix)  # (r*dim, len(vectors)*dim)
        if fld.characteristic:
            for col in block.T:
                red.add(col)
        else:
            w = len(vectors) * T.dim
            for j in range(w):
                red.add([block[i][j] for i in range(r * T.dim)])
    return red


def superficial_check(x: Poly, M: Module, F: FiltrationSpec,
                      window: Tuple[int, int]) -> dict:
    """Window-bounded test of the colon identity (F_{n+1}M : x) and F_c M.

    Verifies (F_{n+1}M :_M x) intersected with F_c M equals F_n M for every n
    in [c, b], inside a truncation chosen past the window.  This is a finite
    certificate for the window only, never a proof for all n; comparisons are
    restricted below the truncation cap, where the colon is exact.
    """
    ring = M.ring
    fld = ring.field
    c, b = window
    if c < 1:
        raise ValueError("window must start at c >= 1")
    xdeg = total_degree(x)
    gdeg = max((total_degree(g) for g in filtration_gens(F, b + 1)), default=1)
    level = gdeg + xdeg + 4

    # precondition: x in F_1 but not in F_2
    lvl0 = max(total_degree(x), gdeg) + 2
    if not _membership(ring, x, filtration_gens(F, 1), lvl0):
        raise ValueError("element is not in F_1")
    if _membership(ring, x, filtration_gens(F, 2), lvl0):
        raise ValueError("element lies in F_2; superficial elements need order exactly 1")

    T = build_truncation(ring, [], level)
    r = M.generator_count
    width = r * T.dim
    coord_deg = [sum(m) for m in T.basis] * r
    cutoff = level - xdeg - 1

    def filtration_submodule(k: int):
        gens = filtration_gens(F, k)
        vectors = []
        for g in gens:
            for i in range(r):
                vec = [dict(g) if i == j else {} for j in range(r)]
                vectors.append(vec)
        # relations of M are part of the submodule (we work in T^r over M)
        for jcol in range(len(M.presentation[0]) if M.presentation and M.presentation[0] else 0):
            vectors.append([M.presentation[i][jcol] for i in range(r)])
        return _span_rows(T, vectors, r)

    def restrict_low_degree(rows):
        """Keep only the components in coordinates of degree <= cutoff."""
        out = RowReducer(width, fld)
        if fld.characteristic:
            mask = np.array([d <= cutoff for d in coord_deg])
            for row in rows:
                if np.any(row[~mask]):
                    continue
                out.add(row)
        else:
            for row in rows:
                if any(row[i] != 0 for i in range(width) if coord_deg[i] > cutoff):
                    continue
                out.add(row)
        return out

    xmat = free_map_matrix(T, [[dict(x) if i == j else {} for j in range(r)] for i in range(r)])
    s_c = filtration_submodule(c)

    failing = None
    witness = None
    for n in range(c, b + 1):
        s_np1 = filtration_submodule(n + 1)
        s_n = filtration_submodule(n)
        # colon: vectors v with x*v inside S_{n+1}, via the stacked kernel
        target_rows = [s_np1.rows[p] for p in s_np1.pivot_columns()]
        if fld.characteristic:
            tcols = np.array(target_rows).T if target_rows else np.zeros((width, 0), dtype=np.int64)
            stacked = np.concatenate([xmat, -tcols % fld.characteristic], axis=1)
            null = nullspace(stacked, width + tcols.shape[1], fld)
            colon_rows = [row[:width] for row in null]
        else:
            tcols = target_rows
            stacked = [list(xrow) + [-(tc[i]) for tc in tcols] for i, xrow in enumerate(xmat)]
            null = nullspace(stacked, width + len(tcols), fld)
            colon_rows = [row[:width] for row in null]

        colon = RowReducer(width, fld)
        for row in colon_rows:
            colon.add(row)

        # LHS = colon intersected with S_c, compared to S_n, below the cutoff
        lhs_ok = True
        wit_vec = None
        inter = _intersect(colon, s_c, width, fld)
        inter_low = restrict_low_degree([inter.rows[p] for p in inter.pivot_columns()])
        s_n_low = restrict_low_degree([s_n.rows[p] for p in s_n.pivot_columns()])
        for p in inter_low.pivot_columns():
            if not s_n_low.contains(inter_low.rows[p]):
                lhs_ok = False
                wit_vec = inter_low.rows[p]
                break
        if lhs_ok:
            for p in s_n_low.pivot_columns():
                if not inter_low.contains(s_n_low.rows[p]):
                    lhs_ok = False
                    break
        if not lhs_ok:
            failing = n
            if wit_vec is not None:
                from .truncate import coords_to_poly_vector
                witness = coords_to_poly_vector(T, wit_vec, r)
            break

    return {
        "superficial": failing is None,
        "window": [c, b],
        "least_failing_n": failing,
        "witness": ([M.ring.show(p) for p in witness] if witness else None),
        "caveat": "finite certificate on the window only; not a proof for all n",
    }


def _intersect(a: RowReducer, b: RowReducer, width: int, fld: Field) -> RowReducer:
    """Intersection of two row spans, as a new reducer."""
    rows_a = [a.rows[p] for p in a.pivot_columns()]
    rows_b = [b.rows[p] for p in b.pivot_columns()]
    out = RowReducer(width, fld)
    if not rows_a or not rows_b:
        return out
    if fld.characteristic:
        p = fld.characteristic
        stacked = np.concatenate([np.array(rows_a).T, (-np.array(rows_b).T) % p], axis=1)
        null = nullspace(stacked, len(rows_a) + len(rows_b), fld)
        A = np.array(rows_a)
        for combo in null:
            vec = (combo[: len(rows_a)] @ A) % p
            out.add(vec)
    else:
        stacked = [[rows_a[j][i] for j in range(len(rows_a))] +
                   [-rows_b[j][i] for j in range(len(rows_b))]
                   for i in range(width)]
        null = nullspace(stacked, len(rows_a) + len(rows_b), fld)
        for combo in null:
            vec = [sum(combo[j] * rows_a[j][i] for j in range(len(rows_a)))
                   for i in range(width)]
            out.add(vec)
    return out
