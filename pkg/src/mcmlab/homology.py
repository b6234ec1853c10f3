"""Tor tables, the Tor-multiplicity invariant, and T-split extensions.

The central quantity is the normalized leading coefficient of
n -> length of Tor_1(M, A/F_{n+1}): computed either as (d-1)! times the
leading coefficient of the exact polynomial fit of that table (the limit
method), or from Hilbert coefficients as e1(A)*mu(M) - e1(M) - e1(Syz M)
(the formula method).  Both are exact integers and must agree; a mismatch is
a hard error because it signals non-MCM input or a bug, never roundoff.

A short exact sequence s: 0 -> N -> E -> M -> 0 of MCM modules has
e(s) = e(M) + e(N) - e(E) >= 0, and s is T-split when e(s) = 0.  Pushouts,
pullbacks, scalar action and Baer sums are realized on presentations, so the
closure properties of the T-split locus can be tested on actual constructions.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .fields import Field
from .fitting import PolyFit, WindowTooShort, factorial, fit_integer_table
from .filtration import FiltrationSpec, filtration_quotient, hilbert_coefficients, module_filtration_length, thread_count
from .linalg import RowReducer, nullspace, rank
from .modules import (
    Module,
    Polymatrix,
    module_kernel,
    pm_block_diag,
    pm_identity,
    pm_is_zero,
    pm_key,
    pm_max_degree,
    pm_mul,
    pm_scalar,
    pm_shape,
    pm_transpose,
    pm_zero,
)
from .poly import Poly, Ring, constant_coeff, p_add, p_is_zero, p_mul, p_scale, total_degree
from .truncate import (
    TruncatedAlgebra,
    build_truncation,
    coords_to_poly_vector,
    free_map_matrix,
    module_length,
    poly_vector_coords,
)


class InvariantViolation(RuntimeError):
    """Exact arithmetic produced an impossible value (bad input or a bug)."""


# ---------------------------------------------------------------------------
# Tor lengths


@dataclass
class TorTable:
    index: int
    window: Tuple[int, int]
    values: Dict[int, int]


def _differentials(m: Module, i: int) -> Tuple[Polymatrix, Polymatrix, int]:
    """(d_i, d_{i+1}, rank of F_{i-1}) of a resolution of the canonical form."""
    canonical = m._cache.get("canonical")
    if canonical is None:
        if m.mf is not None:
            canonical = m
        else:
            canonical = Module.from_presentation(m.ring, m.minimal_presentation(),
                                                 m.mcm_asserted, m.label)
        m._cache["canonical"] = canonical
    d_i = canonical.resolution_differential(i)
    d_next = canonical.resolution_differential(i + 1)
    return d_i, d_next, canonical.generator_count


def tor_length(m: Module, F: FiltrationSpec, i: int, n: int) -> int:
    """Exact length of Tor_i(M, A/F_{n+1})."""
    if i < 0:
        raise ValueError("homological index must be >= 0")
    T = filtration_quotient(F, n)
    if i == 0:
        return module_length(T, m.presentation, m.generator_count)
    d_i, d_next, _ = _differentials(m, i)
    if not d_i or pm_shape(d_i)[1] == 0:
        return 0
    fld = m.ring.field
    cols_i = pm_shape(d_i)[1]
    mat_i = free_map_matrix(T, d_i)
    nullity = cols_i * T.dim - rank(mat_i, fld)
    if not d_next or pm_shape(d_next)[1] == 0:
        return nullity
    mat_next = free_map_matrix(T, d_next)
    return nullity - rank(mat_next, fld)


def tor_table(m: Module, F: FiltrationSpec, i: int, window: Tuple[int, int]) -> TorTable:
    lo, hi = window
    ns = list(range(lo, hi + 1))
    workers = thread_count()
    if workers > 1 and len(ns) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vals = list(pool.map(lambda n: tor_length(m, F, i, n), ns))
        values = dict(zip(ns, vals))
    else:
        values = {n: tor_length(m, F, i, n) for n in ns}
    return TorTable(i, window, values)


# ---------------------------------------------------------------------------
# the Tor-multiplicity invariant


@dataclass
class ETorReport:
    value: int
    method: str  # "limit" | "formula" | "both"
    stabilization_index: Optional[int]
    window: Optional[Tuple[int, int]]
    mcm_asserted: bool
    limit_value: Optional[int] = None
    formula_value: Optional[int] = None


def _tor1_fit(m: Module, F: FiltrationSpec, cap: int = 64) -> Tuple[TorTable, PolyFit]:
    d = m.ring.dimension
    hi = max(2 * d + 8, 6)
    table = tor_table(m, F, 1, (0, hi))
    while True:
        try:
            return table, fit_integer_table(table.values)
        except WindowTooShort:
            if hi >= cap:
                raise
            new_hi = min(2 * hi, cap)
            extra = tor_table(m, F, 1, (hi + 1, new_hi))
            table.values.update(extra.values)
            table.window = (0, new_hi)
            hi = new_hi


def etor(m: Module, F: FiltrationSpec, method: str = "both") -> ETorReport:
    """Normalized multiplicity of n -> length Tor_1(M, A/F_{n+1}).

    Zero exactly when M is free.  The limit method fits the Tor table to its
    eventual polynomial of degree d-1 and multiplies the leading coefficient
    by (d-1)!.  The formula method evaluates
    e1(A)*mu(M) - e1(M) - e1(Syz_1 M).  Method "both" requires exact
    agreement.
    """
    if method not in ("limit", "formula", "both"):
        raise ValueError(f"unknown method {method!r}")
    cache_key = ("etor", F.cache_key(), method)
    got = m._cache.get(cache_key)
    if got is not None:
        return got

    d = m.ring.dimension
    limit_value = None
    formula_value = None
    stab = None
    window = None

    if method in ("limit", "both"):
        table, fit = _tor1_fit(m, F)
        if fit.degree > d - 1:
            raise InvariantViolation(
                f"Tor_1 table grows with degree {fit.degree} > d-1 = {d - 1}; "
                "input is not maximal Cohen-Macaulay")
        if fit.degree == d - 1 and fit.degree >= 0:
            value = fit.leading_coefficient * factorial(d - 1)
            if value.denominator != 1:
                raise InvariantViolation(f"non-integer normalized leading coefficient {value}")
            limit_value = int(value)
        else:
            limit_value = 0
        stab = fit.stabilization_index
        window = table.window

    if method in ("formula", "both"):
        e1A = _e1(Module.free(m.ring, 1), F)
        e1M = _e1(m, F)
        e1S = _e1(m.syzygy(1), F)
        formula_value = e1A * m.mu - e1M - e1S

    if method == "both" and limit_value != formula_value:
        raise InvariantViolation(
            f"limit method gives {limit_value} but the Hilbert-coefficient formula "
            f"gives {formula_value}; non-MCM input or internal error")

    value = limit_value if limit_value is not None else formula_value
    if value < 0:
        raise InvariantViolation(f"negative Tor multiplicity {value}")
    report = ETorReport(value, method, stab, window, m.mcm_asserted,
                        limit_value, formula_value)
    m._cache[cache_key] = report
    return report


def _e1(m: Module, F: FiltrationSpec) -> int:
    if m.is_zero():
        return 0
    coeffs = hilbert_coefficients(m, F)
    return coeffs[1] if len(coeffs) > 1 else 0


# ---------------------------------------------------------------------------
# short exact sequences


@dataclass
class ShortExactSequence:
    """0 -> N --inject--> E --project--> M -> 0 with maps on generators."""

    N: Module
    E: Module
    M: Module
    inject: Polymatrix  # shape gens(E) x gens(N)
    project: Polymatrix  # shape gens(M) x gens(E)
    label: str = ""
    _cache: dict = dc_field(default_factory=dict, repr=False)

    def ring(self) -> Ring:
        return self.N.ring


def _vector_in_image(T: TruncatedAlgebra, pres: Polymatrix, vec: List[Poly]) -> bool:
    """Does vec lie in the column span of pres, modulo m^(level+1)?"""
    fld = T.field
    v = poly_vector_coords(T, vec)
    if not pres or not pres[0]:
        return (not np.any(v)) if fld.characteristic else all(x == 0 for x in v)
    mat = free_map_matrix(T, pres)
    if fld.characteristic:
        base = rank(mat, fld)
        aug = np.concatenate([mat, v.reshape(-1, 1)], axis=1)
        return rank(aug, fld) == base
    base = rank(mat, fld)
    aug = [row + [v[i]] for i, row in enumerate(mat)]
    return rank(aug, fld) == base


def map_well_defined(src: Module, dst: Module, mat: Polymatrix, level: int = None) -> bool:
    """Check mat * (relations of src) lands inside the relations of dst."""
    if dst.generator_count == 0 or src.generator_count == 0:
        return True  # maps into the zero module, or out of it, are forced
    if pm_shape(mat) != (dst.generator_count, src.generator_count):
        raise ValueError(
            f"map shape {pm_shape(mat)} does not match "
            f"{dst.generator_count} x {src.generator_count}")
    comp = pm_mul(mat, src.presentation, src.ring.field) if src.presentation and src.presentation[0] else []
    if not comp or pm_is_zero(comp):
        return True
    if level is None:
        level = max(8, pm_max_degree(comp) + pm_max_degree(dst.presentation) + 4)
    T = build_truncation(src.ring, [], level)
    cols = pm_shape(comp)[1]
    return all(
        _vector_in_image(T, dst.presentation, [comp[i][j] for i in range(len(comp))])
        for j in range(cols)
    )


def verify_exactness(s: ShortExactSequence, levels: Sequence[int] = (2, 4)) -> dict:
    """Finite-certificate exactness check at truncation levels.

    Certifies: both maps are well defined, the composite is zero in M,
    projection is onto (Nakayama: surjectivity mod the maximal ideal), and at
    each probe level the tensored sequence is exact at the middle term (the
    image of the injection fills the kernel of the projection, by rank
    bookkeeping).  Injectivity of N -> E is not certified symbolically; the
    kernel of the tensored injection is reported (it reflects Tor_1(M, -), so
    it need not vanish even for exact sequences).
    """
    got = s._cache.get(("verify", tuple(levels)))
    if got is not None:
        return got
    ring = s.ring()
    fld = ring.field
    report = {"ok": True, "checks": {}}

    ok = map_well_defined(s.N, s.E, s.inject)
    report["checks"]["inject_well_defined"] = ok
    ok2 = map_well_defined(s.E, s.M, s.project)
    report["checks"]["project_well_defined"] = ok2

    comp = pm_mul(s.project, s.inject, fld)
    level = max(6, pm_max_degree(comp) + pm_max_degree(s.M.presentation) + 4)
    T0 = build_truncation(ring, [], level)
    comp_zero = all(
        _vector_in_image(T0, s.M.presentation, [comp[i][j] for i in range(len(comp))])
        for j in range(pm_shape(comp)[1])
    ) if comp and comp[0] else True
    report["checks"]["composite_zero"] = comp_zero

    # surjectivity via Nakayama: generators of M are hit modulo m
    p0 = _constant_matrix(s.project, fld)
    pm0 = _constant_matrix(s.M.presentation, fld) if s.M.presentation and s.M.presentation[0] else None
    rM = s.M.generator_count
    if rM == 0:
        surj = True
    else:
        cols = [list(col) for col in zip(*p0)] if p0 else []
        if pm0:
            cols += [list(col) for col in zip(*pm0)]
        red = RowReducer(rM, fld)
        for c in cols:
            red.add(c)
        surj = red.dim == rM
    report["checks"]["project_surjective_nakayama"] = surj

    middle = {}
    for lv in levels:
        T = build_truncation(ring, [], lv)
        dimE = module_length(T, s.E.presentation, s.E.generator_count)
        rank_inj = _induced_rank(T, s.inject, s.E.presentation, fld)
        rank_proj = _induced_rank(T, s.project, s.M.presentation, fld)
        dimN = module_length(T, s.N.presentation, s.N.generator_count)
        middle[lv] = {
            "dim_E": dimE,
            "rank_inject": rank_inj,
            "rank_project": rank_proj,
            "exact_at_E": rank_inj + rank_proj == dimE,
            "kernel_of_inject": dimN - rank_inj,
        }
    report["checks"]["middle_exactness"] = middle
    report["ok"] = all([
        report["checks"]["inject_well_defined"],
        report["checks"]["project_well_defined"],
        report["checks"]["composite_zero"],
        report["checks"]["project_surjective_nakayama"],
        all(v["exact_at_E"] for v in middle.values()),
    ])
    s._cache[("verify", tuple(levels))] = report
    return report


def _constant_matrix(mat: Polymatrix, fld: Field):
    if not mat:
        return []
    return [[constant_coeff(e, fld) if e else fld.zero for e in row] for row in mat]


def _induced_rank(T: TruncatedAlgebra, mat: Polymatrix, target_pres: Polymatrix, fld: Field) -> int:
    """Rank of the induced map into coker(target_pres) tensored with T."""
    mat_T = free_map_matrix(T, mat)
    if target_pres and target_pres[0]:
        pres_T = free_map_matrix(T, target_pres)
        base = rank(pres_T, fld)
        if fld.characteristic:
            combined = np.concatenate([mat_T, pres_T], axis=1)
        else:
            combined = [a + b for a, b in zip(mat_T, pres_T)]
        return rank(combined, fld) - base
    return rank(mat_T, fld)


def sequence_lengths_additive(s: ShortExactSequence, F: FiltrationSpec, n: int) -> dict:
    """Report whether length is additive on the tensored sequence at level n."""
    lN = module_filtration_length(s.N, F, n)
    lE = module_filtration_length(s.E, F, n)
    lM = module_filtration_length(s.M, F, n)
    return {"n": n, "length_N": lN, "length_E": lE, "length_M": lM,
            "additive": lE == lN + lM}


def etor_of_sequence(s: ShortExactSequence, F: FiltrationSpec, method: str = "limit") -> int:
    """e(M) + e(N) - e(E); nonnegative by sub-additivity, zero iff T-split."""
    val = (etor(s.M, F, method).value + etor(s.N, F, method).value
           - etor(s.E, F, method).value)
    if val < 0:
        raise InvariantViolation(
            f"sequence invariant {val} < 0 violates sub-additivity; "
            "inputs are not exact/MCM")
    return val


def is_tsplit(s: ShortExactSequence, F: FiltrationSpec, method: str = "limit") -> bool:
    return etor_of_sequence(s, F, method) == 0


def split_sequence(n_mod: Module, m_mod: Module, label: str = "") -> ShortExactSequence:
    """The split extension 0 -> N -> N + M -> M -> 0."""
    ring = n_mod.ring
    mid = None
    from .modules import direct_sum
    mid = direct_sum(n_mod, m_mod)
    rN, rM = n_mod.generator_count, m_mod.generator_count
    inject = [[({(0,) * ring.variable_count: ring.field.one} if i == j else {})
               for j in range(rN)] for i in range(rN + rM)]
    project = [[({(0,) * ring.variable_count: ring.field.one} if j == rN + i else {})
                for j in range(rN + rM)] for i in range(rM)]
    return ShortExactSequence(n_mod, mid, m_mod, inject, project,
                              label or "split sequence")


# ---------------------------------------------------------------------------
# pushout, pullback, scalar action, Baer sum


def pushout(s: ShortExactSequence, gmap: Polymatrix, n_prime: Module,
            verify: bool = True, label: str = "") -> ShortExactSequence:
    """Push the extension forward along g: N -> N'.

    The middle is (N' + E)/((-g(n), inject(n)) : n in N), presented on the
    generators of N' followed by those of E.
    """
    ring = s.ring()
    fld = ring.field
    rN, rE = s.N.generator_count, s.E.generator_count
    rNp = n_prime.generator_count
    if rNp and rN and pm_shape(gmap) != (rNp, rN):
        raise ValueError(f"pushout map must be {rNp} x {rN}")
    if verify and not map_well_defined(s.N, n_prime, gmap):
        raise ValueError("pushout map is not well defined modulo relations")

    cols: List[List[Poly]] = []
    for j in range(rN):
        col = [{m: fld.neg(c) for m, c in gmap[i][j].items()} for i in range(rNp)]
        col += [dict(s.inject[i][j]) for i in range(rE)]
        cols.append(col)
    pres_np = n_prime.presentation if n_prime.presentation and n_prime.presentation[0] else None
    if pres_np:
        for j in range(pm_shape(pres_np)[1]):
            cols.append([dict(pres_np[i][j]) for i in range(rNp)] + [{} for _ in range(rE)])
    pres_e = s.E.presentation if s.E.presentation and s.E.presentation[0] else None
    if pres_e:
        for j in range(pm_shape(pres_e)[1]):
            cols.append([{} for _ in range(rNp)] + [dict(pres_e[i][j]) for i in range(rE)])
    presentation = [[cols[j][i] for j in range(len(cols))] for i in range(rNp + rE)]
    middle = Module(ring, presentation, rNp + rE, None,
                    s.N.mcm_asserted and s.E.mcm_asserted, label or "pushout middle")

    one = {(0,) * ring.variable_count: fld.one}
    inject = [[dict(one) if i == j else {} for j in range(rNp)] for i in range(rNp + rE)]
    project = [[(dict(s.project[i][j - rNp]) if j >= rNp else {})
                for j in range(rNp + rE)] for i in range(s.M.generator_count)]
    out = ShortExactSequence(n_prime, middle, s.M, inject, project,
                             label or (f"pushout({s.label})" if s.label else ""))
    if verify:
        rep = verify_exactness(out)
        if not rep["ok"]:
            raise InvariantViolation(f"pushout failed exactness verification: {rep}")
    return out


def pullback(s: ShortExactSequence, hmap: Polymatrix, m_prime: Module,
             verify: bool = True, label: str = "") -> ShortExactSequence:
    """Pull the extension back along h: M' -> M.

    The middle is the fiber product E x_M M', generated by certified kernel
    generators of (project, -h) : E + M' -> M together with the image of N.
    """
    ring = s.ring()
    fld = ring.field
    rE, rM = s.E.generator_count, s.M.generator_count
    rMp = m_prime.generator_count
    rN = s.N.generator_count
    if pm_shape(hmap) != (rM, rMp):
        raise ValueError(f"pullback map must be {rM} x {rMp}")
    if verify and not map_well_defined(m_prime, s.M, hmap):
        raise ValueError("pullback map is not well defined modulo relations")

    vmat = [[dict(s.project[i][j]) for j in range(rE)]
            + [{m: fld.neg(c) for m, c in hmap[i][j].items()} for j in range(rMp)]
            for i in range(rM)]
    kernel_gens = module_kernel(ring, vmat, s.M.presentation)
    # the injected copy of N lies in the fiber product: (inject(n), 0)
    extra = []
    for j in range(rN):
        extra.append([dict(s.inject[i][j]) for i in range(rE)] + [{} for _ in range(rMp)])
    gens = kernel_gens + extra
    t = len(gens)

    target = pm_block_diag(
        s.E.presentation if s.E.presentation else [[] for _ in range(rE)],
        m_prime.presentation if m_prime.presentation else [[] for _ in range(rMp)])
    genmat = [[gens[j][i] for j in range(t)] for i in range(rE + rMp)]
    relation_gens = module_kernel(ring, genmat, target)
    presentation = [[relation_gens[j][i] for j in range(len(relation_gens))]
                    for i in range(t)]
    middle = Module(ring, presentation, t, None,
                    s.E.mcm_asserted and m_prime.mcm_asserted, label or "pullback middle")

    one = {(0,) * ring.variable_count: fld.one}
    inject = [[dict(one) if i == len(kernel_gens) + j else {} for j in range(rN)]
              for i in range(t)]
    project = [[dict(gens[j][rE + i]) for j in range(t)] for i in range(rMp)]
    out = ShortExactSequence(s.N, middle, m_prime, inject, project,
                             label or (f"pullback({s.label})" if s.label else ""))
    if verify:
        rep = verify_exactness(out)
        if not rep["ok"]:
            raise InvariantViolation(f"pullback failed exactness verification: {rep}")
    return out


def scalar_mult(r: Poly, s: ShortExactSequence, verify: bool = True) -> ShortExactSequence:
    """The extension r*s, realized as the pushout along multiplication by r."""
    ring = s.ring()
    rN = s.N.generator_count
    gmap = pm_scalar(rN, r, ring) if rN else []
    return pushout(s, gmap, s.N, verify,
                   label=f"{ring.show(r)}*({s.label})" if s.label else "")


def direct_sum_sequences(s1: ShortExactSequence, s2: ShortExactSequence) -> ShortExactSequence:
    from .modules import direct_sum
    N = direct_sum(s1.N, s2.N)
    E = direct_sum(s1.E, s2.E)
    M = direct_sum(s1.M, s2.M)
    inject = pm_block_diag(s1.inject, s2.inject)
    project = pm_block_diag(s1.project, s2.project)
    return ShortExactSequence(N, E, M, inject, project,
                              f"({s1.label})+({s2.label})" if s1.label and s2.label else "")


def baer_sum(s1: ShortExactSequence, s2: ShortExactSequence,
             verify: bool = True) -> ShortExactSequence:
    """Sum of extension classes: pushout along the codiagonal of the direct
    sum, then pullback along the diagonal."""
    if s1.N.key() != s2.N.key() or s1.M.key() != s2.M.key():
        raise ValueError("Baer sum needs matching end terms")
    ring = s1.ring()
    fld = ring.field
    one = {(0,) * ring.variable_count: fld.one}
    rN = s1.N.generator_count
    rM = s1.M.generator_count

    dsum = direct_sum_sequences(s1, s2)
    codiag = [[dict(one) if (j == i or j == rN + i) else {} for j in range(2 * rN)]
              for i in range(rN)]
    halfway = pushout(dsum, codiag, s1.N, verify)
    diag = [[dict(one) if i % rM == j else {} for j in range(rM)] for i in range(2 * rM)]
    out = pullback(halfway, diag, s1.M, verify)
    out.label = f"baer({s1.label},{s2.label})" if s1.label and s2.label else ""
    return out


def annihilation_index(s: ShortExactSequence, a: Poly, cap: int,
                       F: FiltrationSpec, method: str = "limit") -> Optional[int]:
    """Least n <= cap with a^n * s T-split; None when not found within cap."""
    ring = s.ring()
    fld = ring.field
    if p_is_zero(a) or not fld.is_zero(constant_coeff(a, fld)):
        raise ValueError("annihilation scalar must lie in the maximal ideal")
    if is_tsplit(s, F, method):
        return 0
    power = dict(a)
    for n in range(1, cap + 1):
        sn = scalar_mult(power, s)
        if is_tsplit(sn, F, method):
            return n
        power = p_mul(power, a, fld)
    return None


# ---------------------------------------------------------------------------
# Ext groups for matrix-factorization modules


@dataclass
class ExtGroup:
    """Ext^1(M, N) materialized as a finite k-vector space of classes.

    Classes are given by maps from the first syzygy of M into N; each basis
    class lifts to a generator-level matrix (cocycle) from which the actual
    extension is built by pushing the canonical syzygy sequence forward.
    """

    M: Module
    N: Module
    dim: int
    basis_cocycles: List[Polymatrix]  # each: gens(N) x size(phi)
    level: int


def ext_group(m: Module, n_mod: Module, max_level: int = 48) -> ExtGroup:
    """Homology of Hom(2-periodic resolution of M, N) in degree 1, exactly.

    Cocycles are certified kernel generators (never cap-degree artifacts), so
    every class representative is an honest module element; the quotient
    dimension is read off truncated spans and must stabilize three times.
    """
    if m.mf is None:
        raise ValueError("Ext materialization needs an MF-backed first argument")
    ring = m.ring
    size = m.mf.size
    rN = n_mod.generator_count

    psi_hom = _hom_action_matrix(m.mf.psi, rN, ring)  # cocycle condition map
    phi_hom = _hom_action_matrix(m.mf.phi, rN, ring)  # coboundaries
    pres_n = n_mod.presentation if n_mod.presentation and n_mod.presentation[0] else None
    target = None
    if pres_n:
        target = pres_n
        for _ in range(size - 1):
            target = pm_block_diag(target, pres_n)

    cocycle_gens = module_kernel(ring, psi_hom, target)
    boundary_cols = phi_hom if target is None else \
        [row_a + row_b for row_a, row_b in zip(phi_hom, target)]

    history = []
    level = max(8, 2 * (pm_max_degree(m.mf.phi) + pm_max_degree(n_mod.presentation)
                        + max((pm_max_degree([g]) for g in cocycle_gens), default=0)) + 4)
    while level <= max_level:
        dim, basis = _ext_at_level(m, n_mod, cocycle_gens, boundary_cols, level)
        history.append((dim, basis))
        if len(history) >= 3 and history[-1][0] == history[-2][0] == history[-3][0]:
            return ExtGroup(m, n_mod, dim, basis, level)
        level += 2
    raise InvariantViolation(f"Ext dimension failed to stabilize by level {max_level}")


def _hom_action_matrix(mat: Polymatrix, r: int, ring: Ring) -> Polymatrix:
    """Matrix of precomposition G -> G*mat on column-stacked Hom spaces.

    Hom(A^a, N) with N on r generators is stacked as a blocks of r coordinates;
    precomposition by mat: A^b -> A^a sends block j of the output to
    sum_k mat[k][j] * (block k of the input).
    """
    a, b = pm_shape(mat)
    out = pm_zero(b * r, a * r)
    for j in range(b):
        for k in range(a):
            entry = mat[k][j]
            if not entry:
                continue
            for i in range(r):
                out[j * r + i][k * r + i] = dict(entry)
    return out


def _ext_at_level(m: Module, n_mod: Module, cocycle_gens: List[List[Poly]],
                  boundary_cols: Polymatrix, level: int):
    """Length of (cocycle module)/(boundary module) at one truncation level,
    with class representatives drawn from monomial multiples of the certified
    cocycle generators."""
    ring = m.ring
    fld = ring.field
    size = m.mf.size
    rN = n_mod.generator_count
    width_gens = size * rN

    T = build_truncation(ring, [], level)
    dim = T.dim
    width = width_gens * dim

    boundaries = RowReducer(width, fld)
    if boundary_cols and boundary_cols[0]:
        bmat = free_map_matrix(T, boundary_cols)
        if fld.characteristic:
            for col in bmat.T:
                boundaries.add(col)
        else:
            for j in range(pm_shape(boundary_cols)[1] * dim):
                boundaries.add([bmat[i][j] for i in range(width)])

    # representative pool: u * gen, ordered by the degree of the multiplier
    basis: List[Polymatrix] = []
    witness = RowReducer(width, fld)
    for p in boundaries.pivot_columns():
        witness.add(boundaries.rows[p])
    boundary_dim = boundaries.dim
    if cocycle_gens:
        genmat = [[cocycle_gens[j][i] for j in range(len(cocycle_gens))]
                  for i in range(width_gens)]
        zmat = free_map_matrix(T, genmat)  # columns: (gen j, basis monomial u)
        mono_order = sorted(range(dim), key=lambda t: (sum(T.basis[t]), T.basis[t]))
        for u_pos in mono_order:
            for j in range(len(cocycle_gens)):
                col = zmat[:, j * dim + u_pos] if fld.characteristic else \
                    [zmat[i][j * dim + u_pos] for i in range(width)]
                if witness.contains(col):
                    continue
                witness.add(col)
                mono = T.basis[u_pos]
                polyvec = [
                    {}
                    if p_is_zero(cocycle_gens[j][i]) else
                    {tuple(a + b for a, b in zip(mono, mn)): c
                     for mn, c in cocycle_gens[j][i].items()}
                    for i in range(width_gens)
                ]
                coc = [[polyvec[jj * rN + ii] for jj in range(size)] for ii in range(rN)]
                basis.append(coc)
    ext_dim = witness.dim - boundary_dim
    if ext_dim != len(basis):
        raise InvariantViolation("class representatives out of step with the quotient")
    return ext_dim, basis


def canonical_syzygy_sequence(m: Module) -> ShortExactSequence:
    """0 -> Syz_1(M) --phi--> A^size -> M -> 0 for an MF-backed module."""
    if m.mf is None:
        raise ValueError("needs an MF-backed module")
    ring = m.ring
    size = m.mf.size
    syz = m.syzygy(1)
    free = Module.free(ring, size)
    inject = [[dict(m.mf.phi[i][j]) for j in range(size)] for i in range(size)]
    one = {(0,) * ring.variable_count: ring.field.one}
    project = [[dict(one) if i == j else {} for j in range(size)] for i in range(size)]
    return ShortExactSequence(syz, free, m, inject, project,
                              f"syzygy sequence of {m.label}" if m.label else "")


def extension_from_cocycle(m: Module, n_mod: Module, cocycle: Polymatrix,
                           verify: bool = True) -> ShortExactSequence:
    """Extension of M by N from a map Syz_1(M) -> N given on MF generators."""
    seq = canonical_syzygy_sequence(m)
    return pushout(seq, cocycle, n_mod, verify)


def ext_class_sequence(grp: ExtGroup, coeffs: Sequence[int],
                       verify: bool = True) -> ShortExactSequence:
    """Extension realizing the class sum_i coeffs[i] * basis[i]."""
    ring = grp.M.ring
    fld = ring.field
    rN = grp.N.generator_count
    size = grp.M.mf.size
    total = pm_zero(rN, size)
    for c, coc in zip(coeffs, grp.basis_cocycles):
        if fld.is_zero(fld.of(c)):
            continue
        for i in range(rN):
            for j in range(size):
                if coc[i][j]:
                    total[i][j] = p_add(total[i][j], p_scale(fld.of(c), coc[i][j], fld), fld)
    return extension_from_cocycle(grp.M, grp.N, total, verify)


# ---------------------------------------------------------------------------
# cosyzygy and cone extensions


def cosyzygy(m: Module) -> Tuple[Module, ShortExactSequence]:
    """The cosyzygy W with its exhibiting sequence 0 -> M -> free -> W -> 0.

    For an MF module coker(phi) the pair is (coker(psi), the psi-embedding);
    in general the presentation of the dual is computed by certified kernels
    and dualized back.
    """
    ring = m.ring
    if not ring.is_gorenstein:
        raise ValueError("cosyzygy needs a Gorenstein ring")
    fld = ring.field
    one = {(0,) * ring.variable_count: fld.one}
    if m.is_free():
        zero = Module.zero(ring)
        rank_m = m.generator_count
        ident = [[dict(one) if i == j else {} for j in range(rank_m)] for i in range(rank_m)]
        seq = ShortExactSequence(m, m, zero, ident, [], "trivial cosyzygy")
        return zero, seq
    if m.mf is not None:
        size = m.mf.size
        w = Module.from_mf(ring, m.mf.psi, m.mf.phi,
                           label=f"cosyz({m.label})" if m.label else "")
        free = Module.free(ring, size)
        inject = [[dict(m.mf.psi[i][j]) for j in range(size)] for i in range(size)]
        project = [[dict(one) if i == j else {} for j in range(size)] for i in range(size)]
        seq = ShortExactSequence(m, free, w, inject, project,
                                 f"cosyzygy sequence of {m.label}" if m.label else "")
        rep = verify_exactness(seq)
        if not rep["ok"]:
            raise InvariantViolation(f"cosyzygy sequence failed verification: {rep}")
        return w, seq

    # dual route: generators of Hom(M, A) are kernel generators of the
    # transposed presentation; rows of that generator matrix embed M into
    # the dual free module.
    pres = m.minimal_presentation()
    mini = Module.from_presentation(ring, pres, m.mcm_asserted, m.label)
    r = len(pres)
    dual_gens = module_kernel(ring, pm_transpose(pres))
    t = len(dual_gens)
    wmat = [[dual_gens[j][i] for j in range(t)] for i in range(r)]  # r x t
    inject = pm_transpose(wmat)  # t x r : generator i of M -> row i of W
    relations = module_kernel(ring, inject)
    presentation = [[relations[j][i] for j in range(len(relations))] for i in range(t)]
    w = Module.from_presentation(ring, presentation, m.mcm_asserted,
                                 f"cosyz({m.label})" if m.label else "")
    free = Module.free(ring, t)
    project = [[dict(one) if i == j else {} for j in range(t)] for i in range(t)]
    seq = ShortExactSequence(mini, free, w, inject, project,
                             f"cosyzygy sequence of {m.label}" if m.label else "")
    rep = verify_exactness(seq)
    if not rep["ok"]:
        raise InvariantViolation(f"cosyzygy sequence failed verification: {rep}")
    return w, seq


def cone_extension(m: Module, n_mod: Module, fmap: Polymatrix,
                   verify: bool = True) -> ShortExactSequence:
    """The extension 0 -> N -> C(f) -> cosyzygy(M) -> 0 induced by f: M -> N."""
    if verify and not map_well_defined(m, n_mod, fmap):
        raise ValueError("cone map is not well defined modulo relations")
    _, seq = cosyzygy(m)
    return pushout(seq, fmap, n_mod, verify,
                   label="cone extension")
