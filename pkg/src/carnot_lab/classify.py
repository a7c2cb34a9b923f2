"""Rigidity verdicts and the constructive Heisenberg decompositions.

A Carnot algebra is non-rigid exactly when some nonzero element of the
complexified first layer has rank at most one.  When it is, the rank-one
elements organize V1 into commuting Heisenberg blocks (real or complex), and
the algebra can be compared against a quotient of a direct sum of identical
Heisenberg algebras.  Everything here is exact except the rank search that
feeds it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from . import linalg
from .algebra import (
    CarnotAlgebra,
    ComplexGradedVector,
    GradedVector,
    apply_matrix,
    bracket,
    build_algebra,
    complex_bracket,
    verify_graded_automorphism,
)
from .catalog import check_product_conditions, complex_heisenberg_power, heisenberg_power
from .exceptions import (
    ConjugateClassCollision,
    DecompositionIncomplete,
    DegenerateForm,
    NotAnAutomorphism,
    PaperInvariantViolation,
    PreconditionViolation,
    UnequalSummandDimensions,
)
from .linalg import GaussianRational
from .rank import (
    DEFAULT_RESTARTS,
    RankReport,
    _vec_strings,
    complex_span_rank,
    equivalence_classes,
    first_layer_kernel,
    harvest_witnesses,
    min_rank_search,
)

COMPLEX_CENTER_ASSUMPTION = (
    "graded automorphisms of the complex Heisenberg algebra act on its center "
    "by z -> a z or z -> a conj(z); assumed, not verified"
)


# ---------------------------------------------------------------------------
# result types


@dataclass
class Summand:
    basis: list  # spanning vectors of U_j inside V1
    pairs: list  # (X, Y) for real summands, (X, X~, Y, Y~) for complex ones
    centers: list  # [Z] or [Z1, Z~1]

    @property
    def m(self) -> int:
        return len(self.pairs)

    def to_dict(self) -> dict:
        return {
            "basis": [_vec_strings(v) for v in self.basis],
            "pairs": [[_vec_strings(v) for v in p] for p in self.pairs],
            "centers": [_vec_strings(z) for z in self.centers],
        }


@dataclass
class HeisenbergDecomposition:
    algebra: CarnotAlgebra
    kind: str  # real or complex
    summands: list

    def to_dict(self) -> dict:
        return {"kind": self.kind, "m": [s.m for s in self.summands], "summands": [s.to_dict() for s in self.summands]}


@dataclass
class ProductCertificate:
    kind: str
    checks: dict
    projection_kernel: list  # basis of V in V~2 coordinates
    reconstruction: CarnotAlgebra | None
    projection: list | None
    assumptions: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "checks": dict(self.checks),
            "projection_kernel": [[str(c) for c in row] for row in self.projection_kernel],
            "reconstruction_layers": list(self.reconstruction.layer_dims) if self.reconstruction else None,
            "assumptions": list(self.assumptions),
        }


@dataclass
class RigidityVerdict:
    verdict: str
    status: str
    case: str | None
    evidence: list
    details: dict = field(default_factory=dict)
    decomposition: HeisenbergDecomposition | None = None

    def to_dict(self) -> dict:
        out = {
            "verdict": self.verdict,
            "status": self.status,
            "case": self.case,
            "evidence": [r.to_dict() for r in self.evidence],
        }
        out.update(self.details)
        return out


# ---------------------------------------------------------------------------
# Euclidean factors


def split_euclidean_factor(a: CarnotAlgebra):
    """Split off the exact kernel of the first layer: n = R^k ⊕ a'.

    Returns ``(k, a', C)`` where the columns of ``C`` are the new basis
    (kernel vectors, then the complement in V1, then the higher layers) in old
    coordinates.  ``a'`` is None when the whole algebra is abelian.
    """
    n1 = a.layer_dims[0]
    kernel = first_layer_kernel(a)
    k = len(kernel)
    ident = linalg.identity(a.dim)
    if k == 0:
        return 0, a, ident
    krows = [list(v.coords[:n1]) for v in kernel]
    std = [ident[i][:n1] for i in range(n1)]
    comp = linalg.complete_basis(krows, std)
    comp_vecs = [a.basis_vector(i) for i in comp]
    higher = [a.basis_vector(i) for i in range(n1, a.dim)]
    cols = list(kernel) + comp_vecs + higher
    C = [[cols[j].coords[i] for j in range(a.dim)] for i in range(a.dim)]
    if not comp_vecs:
        return k, None, C
    new = comp_vecs + higher
    pos = {i: t for t, i in enumerate(comp)}
    pos.update({i: len(comp) + (i - n1) for i in range(n1, a.dim)})
    table = {}
    for p in range(len(new)):
        for q in range(p + 1, len(new)):
            br = bracket(a, new[p], new[q])
            if br:
                # brackets land in layers >= 2, whose coordinates are unchanged
                table[(p, q)] = {pos[i]: c for i, c in enumerate(br.coords) if c}
    dims = [n1 - k] + list(a.layer_dims[1:])
    reduced = build_algebra(dims, table, name=f"{a.name}/euclidean" if a.name else None)
    return k, reduced, C


# ---------------------------------------------------------------------------
# Darboux bases


def _form_value(a, u, v, Z):
    """w with [u, v] = w Z, for real or complex vectors."""
    cx = isinstance(Z, ComplexGradedVector)
    br = complex_bracket(a, u, v) if cx else bracket(a, u, v)
    zc = Z.gaussian() if cx else list(Z.coords)
    bc = br.gaussian() if cx else list(br.coords)
    lead = next(i for i, c in enumerate(zc) if c)
    w = bc[lead] / zc[lead]
    expect = Z.scale(w) if cx else Z * w
    if br != expect:
        raise PreconditionViolation(f"[{u}, {v}] is not a multiple of {Z}")
    return w


def _abs_key(w):
    return w.abs2() if isinstance(w, GaussianRational) else abs(w)


def _scale(v, c):
    return v.scale(c) if isinstance(v, ComplexGradedVector) else v * c


def _darboux(a: CarnotAlgebra, U: Sequence, Z):
    """Symplectic basis of the form (u, v) -> [u, v] / Z on span(U)."""
    cx = isinstance(Z, ComplexGradedVector)
    U = list(U)
    omega = [[_form_value(a, u, v, Z) for v in U] for u in U]
    if cx:
        rows = [ComplexGradedVector.from_gaussian(r) for r in omega]
        r = complex_span_rank(rows)
    else:
        r = linalg.rank(omega)
    if r < len(U):
        if cx:
            real_rows = []
            for row in omega:
                g = [GaussianRational.of(c) for c in row]
                real_rows.append([c.re for c in g] + [-c.im for c in g])
                real_rows.append([c.im for c in g] + [c.re for c in g])
            null = linalg.nullspace(real_rows, 2 * len(U))[0]
            coeffs = [GaussianRational(null[i], null[len(U) + i]) for i in range(len(U))]
        else:
            coeffs = linalg.nullspace(omega, len(U))[0]
        witness = None
        for c, u in zip(coeffs, U):
            term = _scale(u, c)
            witness = term if witness is None else witness + term
        raise DegenerateForm(witness)
    pairs = []
    while U:
        omega = [[_form_value(a, u, v, Z) for v in U] for u in U]
        best = None
        for i in range(len(U)):
            for j in range(i + 1, len(U)):
                w = omega[i][j]
                if w and (best is None or _abs_key(w) > _abs_key(best[2])):
                    best = (i, j, w)
        if best is None:  # pragma: no cover - excluded by the rank check
            raise DegenerateForm(U[0])
        i, j, w = best
        X = U[i]
        Y = _scale(U[j], 1 / w)
        pairs.append((X, Y))
        rest = []
        for t, v in enumerate(U):
            if t in (i, j):
                continue
            wy = _form_value(a, v, Y, Z)
            wx = _form_value(a, v, X, Z)
            rest.append(v - _scale(X, wy) + _scale(Y, wx))
        U = rest
    return pairs


def darboux_basis(a: CarnotAlgebra):
    """Pairs (X_j, Y_j) with [X_j, Y_j] = Z and all other brackets zero.

    Requires step 2 with a one-dimensional second layer.
    """
    if a.step != 2 or a.layer_dims[1] != 1:
        raise PreconditionViolation("darboux_basis needs a step-2 algebra with dim V2 = 1")
    Z = a.basis_vector(a.layer_dims[0])
    pairs = _darboux(a, [a.basis_vector(i) for i in range(a.layer_dims[0])], Z)
    _verify_real_pairs(a, pairs, Z)
    return pairs


def _verify_real_pairs(a, pairs, Z):
    flat = [v for p in pairs for v in p]
    for s, t in ((s, t) for s in range(len(flat)) for t in range(s + 1, len(flat))):
        expect = Z if (s % 2 == 0 and t == s + 1) else a.zero()
        if bracket(a, flat[s], flat[t]) != expect:
            raise PaperInvariantViolation("Darboux relations fail")


# ---------------------------------------------------------------------------
# decompositions


def _check_direct_sum(a, blocks):
    n1 = a.layer_dims[0]
    flat = [v for b in blocks for v in b]
    if len(flat) != n1 or linalg.rank([v.coords for v in flat]) != n1:
        raise DecompositionIncomplete(
            f"blocks span a {linalg.rank([v.coords for v in flat]) if flat else 0}-dimensional subspace of V1 (dim {n1})"
        )
    for i in range(len(blocks)):
        for j in range(i + 1, len(blocks)):
            for u in blocks[i]:
                for v in blocks[j]:
                    if bracket(a, u, v):
                        raise PaperInvariantViolation("distinct summands do not commute")


def _real_summand(a, basis, Z):
    pairs = _darboux(a, basis, Z)
    _verify_real_pairs(a, pairs, Z)
    return Summand(list(basis), pairs, [Z])


def heisenberg_sum_decompose(a: CarnotAlgebra, witnesses, expand: bool = True) -> HeisenbergDecomposition:
    """Split V1 into extended classes of rank-one witnesses, each a Heisenberg block."""
    if a.step != 2:
        raise DecompositionIncomplete("Heisenberg blocks require a step-2 algebra")
    dec = equivalence_classes(a, list(witnesses), expand=expand)
    blocks = [basis for basis, _ in dec.classes]
    _check_direct_sum(a, blocks)
    summands = [_real_summand(a, basis, Z) for basis, Z in dec.classes]
    return HeisenbergDecomposition(a, "real", summands)


def decomposition_from_blocks(a: CarnotAlgebra, blocks) -> HeisenbergDecomposition:
    """Real decomposition from user-chosen commuting blocks of V1.

    Each block must have a one-dimensional bracket image; distinct blocks may
    share it (then the algebra is a proper quotient of the block sum).
    """
    if a.step != 2:
        raise DecompositionIncomplete("Heisenberg blocks require a step-2 algebra")
    blocks = [list(b) for b in blocks]
    _check_direct_sum(a, blocks)
    summands = []
    for b in blocks:
        imgs = [bracket(a, u, v) for i, u in enumerate(b) for v in b[i + 1:]]
        imgs = [z for z in imgs if z]
        if not imgs or linalg.rank([z.coords for z in imgs]) != 1:
            raise PreconditionViolation("block bracket image is not one-dimensional")
        lead = next(c for c in imgs[0].coords if c)
        summands.append(_real_summand(a, b, imgs[0] * (1 / lead)))
    return HeisenbergDecomposition(a, "real", summands)


def _half(v: GradedVector) -> GradedVector:
    return v * Fraction(1, 2)


def complex_heisenberg_decompose(a: CarnotAlgebra, complex_witnesses, expand: bool = True) -> HeisenbergDecomposition:
    """Real bases {X_s, X~_s, Y_s, Y~_s | Z1, Z~1} of complex Heisenberg blocks."""
    ws = [w if isinstance(w, ComplexGradedVector) else ComplexGradedVector.from_real(w) for w in complex_witnesses]
    for w in list(ws):
        c = w.conjugate()
        if c not in ws:
            ws.append(c)
    dec = equivalence_classes(a, ws, expand=expand)
    lines = [Z for _, Z in dec.classes]
    for Z in lines:
        zc = Z.conjugate()
        lead = next(c for c in zc.gaussian() if c)
        if zc.scale(1 / lead) == Z:
            raise ConjugateClassCollision(f"image line {Z} equals its conjugate")
    n1 = a.layer_dims[0]
    allvecs = [v for basis, _ in dec.classes for v in basis]
    if sum(len(b) for b, _ in dec.classes) != n1 or complex_span_rank(allvecs) != n1:
        raise DecompositionIncomplete("complex classes do not span the complexified first layer")
    used = set()
    summands = []
    for idx, (basis, Z) in enumerate(dec.classes):
        if idx in used:
            continue
        zc = Z.conjugate()
        lead = next(c for c in zc.gaussian() if c)
        zc = zc.scale(1 / lead)
        partner = next((j for j, (_, Z2) in enumerate(dec.classes) if Z2 == zc), None)
        if partner is None:
            raise DecompositionIncomplete(f"no conjugate class for image line {Z}")
        used.update({idx, partner})
        pairs = _darboux(a, basis, Z)
        Z1, Zt1 = _half(Z.real), _half(Z.imag)
        quads = [(A.real, A.imag, B.real, B.imag) for A, B in pairs]
        real_basis = [v for q in quads for v in q]
        summands.append(Summand(real_basis, quads, [Z1, Zt1]))
    for s in summands:
        _verify_complex_relations(a, s)
    _check_direct_sum(a, [s.basis for s in summands])
    if any(linalg.rank([s.centers[0].coords, s.centers[1].coords]) != 2 for s in summands):
        raise PaperInvariantViolation("Z1 and Z~1 are linearly dependent")
    return HeisenbergDecomposition(a, "complex", summands)


def _verify_complex_relations(a, s: Summand):
    Z1, Zt1 = s.centers
    zero = a.zero()
    flat = [v for q in s.pairs for v in q]
    expected = {}
    for t in range(len(s.pairs)):
        x, xt, y, yt = (4 * t + r for r in range(4))
        expected[(x, y)] = Z1
        expected[(x, yt)] = Zt1
        expected[(xt, y)] = Zt1
        expected[(xt, yt)] = -Z1
    for i in range(len(flat)):
        for j in range(i + 1, len(flat)):
            if bracket(a, flat[i], flat[j]) != expected.get((i, j), zero):
                raise PaperInvariantViolation(f"complex Heisenberg relation fails for basis pair ({i}, {j})")


# ---------------------------------------------------------------------------
# product certification


def _projection(decomp: HeisenbergDecomposition, tilde: CarnotAlgebra, m: int, n: int):
    a = decomp.algebra
    cx = decomp.kind == "complex"
    per = 4 * m if cx else 2 * m
    block = 2 if cx else 1
    cols = [None] * tilde.dim
    for j, s in enumerate(decomp.summands):
        if cx:
            firsts = [q[r] for r in range(4) for q in s.pairs]  # X.., X~.., Y.., Y~..
        else:
            firsts = [p[0] for p in s.pairs] + [p[1] for p in s.pairs]
        for t, v in enumerate(firsts):
            cols[j * per + t] = v
        for t, z in enumerate(s.centers):
            cols[n * per + j * block + t] = z
    return [[cols[c].coords[r] for c in range(tilde.dim)] for r in range(a.dim)]


def heisenberg_product_certify(decomp: HeisenbergDecomposition, automorphisms=None) -> ProductCertificate:
    """Rebuild n~ = ⊕ H^m, the projection P and V = ker P, then test the product conditions.

    ``automorphisms`` are graded automorphisms of the reconstruction n~, given
    as square matrices in its basis; their restrictions to V~2 generate the
    group used for the invariance and permutation conditions.
    """
    cx = decomp.kind == "complex"
    ms = [s.m for s in decomp.summands]
    n = len(ms)
    block = 2 if cx else 1
    keys = ("same_factor", "1", "2", "3", "4")
    assumptions = [COMPLEX_CENTER_ASSUMPTION] if cx else []
    if len(set(ms)) != 1:
        checks = {k: "not_checked" for k in keys}
        checks["same_factor"] = "fail"
        cert = ProductCertificate(decomp.kind, checks, [], None, None, assumptions)
        raise UnequalSummandDimensions(ms, cert)
    m = ms[0]
    tilde = complex_heisenberg_power(m, n) if cx else heisenberg_power(m, n)
    P = _projection(decomp, tilde, m, n)
    a = decomp.algebra
    for i in range(tilde.dim):
        for j in range(i + 1, tilde.dim):
            lhs = apply_matrix(P, bracket(tilde, tilde.basis_vector(i), tilde.basis_vector(j)))
            rhs = bracket(a, apply_matrix(P, tilde.basis_vector(i)), apply_matrix(P, tilde.basis_vector(j)))
            if lhs != rhs:
                raise PaperInvariantViolation("projection is not a homomorphism")
    off2 = tilde.offsets[1]
    V = []
    for v in linalg.nullspace(P, tilde.dim):
        if any(v[:off2]):
            raise PaperInvariantViolation("projection kernel meets the first layer")
        V.append(v[off2:])
    cond = check_product_conditions(n, block, V)
    checks = {"same_factor": "pass", "1": "pass" if cond["1"] else "fail"}
    if cx:
        checks.update({"2": "not_checked", "3": "not_checked", "4": "not_checked"})
    else:
        checks.update({"2": "pass" if cond["2"] else "fail", "3": "not_checked", "4": "not_checked"})
    group_keys = ("2", "3", "4") if cx else ("3", "4")
    if n == 1:
        for k in group_keys:
            checks[k] = "pass"
    elif automorphisms:
        checks.update(_group_checks(tilde, V, n, block, automorphisms, cx))
    return ProductCertificate(decomp.kind, checks, V, tilde, P, assumptions)


def _group_checks(tilde, V, n, block, automorphisms, cx) -> dict:
    off2 = tilde.offsets[1]
    d2 = n * block
    invariant = permutes = similar = True
    perms = []
    for idx, M in enumerate(automorphisms):
        ok, why = verify_graded_automorphism(tilde, M)
        if not ok:
            raise NotAnAutomorphism(idx, why)
        g = [[linalg.as_fraction(M[off2 + r][off2 + c]) for c in range(d2)] for r in range(d2)]
        for v in V:
            if not linalg.in_span(V, linalg.matvec(g, v)):
                invariant = False
        sigma = []
        for j in range(n):
            cols = range(j * block, (j + 1) * block)
            targets = {r // block for c in cols for r in range(d2) if g[r][c]}
            if len(targets) != 1:
                permutes = False
                sigma.append(None)
                continue
            t = targets.pop()
            sigma.append(t)
            if cx:
                (p, q), (r, s) = [[g[t * 2 + rr][j * 2 + cc] for cc in range(2)] for rr in range(2)]
                if not ((p == s and q == -r) or (p == -s and q == r)):
                    similar = False
        if permutes and len(set(sigma)) != n:
            permutes = False
        perms.append(sigma)
    transitive = False
    if permutes:
        orbit, frontier = {0}, [0]
        while frontier:
            j = frontier.pop()
            for sigma in perms:
                t = sigma[j]
                if t not in orbit:
                    orbit.add(t)
                    frontier.append(t)
        transitive = len(orbit) == n
    perm_ok = "pass" if permutes and transitive else "fail"
    inv_ok = "pass" if invariant else "fail"
    if cx:
        return {"2": inv_ok, "3": perm_ok, "4": "pass" if similar and permutes else "fail"}
    return {"3": inv_ok, "4": perm_ok}


# ---------------------------------------------------------------------------
# verdict


def rigidity_classify(a: CarnotAlgebra, seed: int = 0, restarts: int = DEFAULT_RESTARTS) -> RigidityVerdict:
    """Non-rigid iff r1 over C is at most one; refine the case when non-rigid."""
    complex_report = min_rank_search(a, "complex", restarts=restarts, seed=seed)
    real_report = min_rank_search(a, "real", restarts=restarts, seed=seed)
    evidence = [real_report, complex_report]
    details = {"r1": real_report.min_rank, "r1C": complex_report.min_rank}
    if a.is_abelian():
        return RigidityVerdict("non_rigid", "exact", "euclidean", evidence, details)
    if complex_report.min_rank > 1:
        # no certificate of nonexistence for lower-rank elements
        return RigidityVerdict("rigid", "numerical", None, evidence, details)
    status = complex_report.status
    if status != "exact" or real_report.status != "exact":
        return RigidityVerdict("non_rigid", "numerical", "undetermined", evidence, details)
    if real_report.min_rank == 0 or a.step >= 3:
        return RigidityVerdict("non_rigid", "exact", "reducible_first_layer", evidence, details)
    if real_report.min_rank == 1:
        ws = harvest_witnesses(a, real_report)
        try:
            dec = heisenberg_sum_decompose(a, ws)
        except DecompositionIncomplete:
            return RigidityVerdict("non_rigid", "exact", "reducible_first_layer", evidence, details)
        details["summands"] = len(dec.summands)
        return RigidityVerdict("non_rigid", "exact", "heisenberg_product_candidate", evidence, details, dec)
    ws = harvest_witnesses(a, complex_report)
    try:
        dec = complex_heisenberg_decompose(a, ws)
    except (DecompositionIncomplete, ConjugateClassCollision):
        return RigidityVerdict("non_rigid", "exact", "reducible_first_layer", evidence, details)
    details["summands"] = len(dec.summands)
    return RigidityVerdict("non_rigid", "exact", "complex_heisenberg_product_candidate", evidence, details, dec)
