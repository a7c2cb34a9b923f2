"""Minimum rank of first-layer elements, rank-one image lines and classes.

The search is layered.  Rank 0 is a linear kernel computation.  For k >= 1
the feasibility of rank(x) <= k is tested by minimizing the sum of squared
(k+1)-minors of ad(x), which equals the elementary symmetric polynomial
e_{k+1} of the squared singular values, over the unit sphere of V1 (or of its
complexification).  Near-zero minimizers are rounded to rationals and checked
exactly, so any witness reported as ``exact`` is certified independently of
the floating-point knobs.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import linalg
from .algebra import (
    CarnotAlgebra,
    ComplexGradedVector,
    GradedVector,
    ad_matrix,
    apply_matrix,
    bracket,
    complex_bracket,
    element_rank,
    element_rank_complex,
    verify_graded_automorphism,
)
from .exceptions import (
    EmptyWitnessSet,
    NotAnAutomorphism,
    PaperInvariantViolation,
    RankNotOne,
    SearchInconclusive,
    WitnessNotRankOne,
)
from .linalg import ONE, ZERO, GaussianRational

DEFAULT_RESTARTS = 64
DEFAULT_TOLERANCE = 1e-18
DEFAULT_BUDGET = 10**6
MAX_ITER = 500
BATCH = 8
_DENOMS = (1, 2, 3, 4, 5, 6, 8, 10, 12, 16, 100, 1000)


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("CARNOT_LAB_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# reports


def _vec_strings(v):
    if v is None:
        return None
    if isinstance(v, ComplexGradedVector):
        return [str(c) for c in v.gaussian()]
    return v.to_strings()


@dataclass
class RankReport:
    field: str
    min_rank: int
    status: str
    witness: object
    residual: float = 0.0
    # unit-sphere points of restarts that reached tolerance (not serialized)
    candidates: list = field(default_factory=list, repr=False)

    @property
    def min_rank_estimate(self) -> int:
        return self.min_rank

    def to_dict(self) -> dict:
        return {
            "field": self.field,
            "min_rank": self.min_rank,
            "status": self.status,
            "witness": _vec_strings(self.witness),
            "residual": self.residual,
        }


@dataclass
class EquivalenceClassDecomposition:
    classes: list  # (basis vectors, image line generator)
    residual: list

    def to_dict(self) -> dict:
        return {
            "classes": [
                {"basis": [_vec_strings(v) for v in basis], "image": _vec_strings(z)} for basis, z in self.classes
            ],
            "residual": [_vec_strings(v) for v in self.residual],
        }


@dataclass
class InvariantSubspace:
    kind: str  # W1, W1C or hatW1
    basis: list
    witnesses_used: list
    lower_bound: bool = True

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "basis": [_vec_strings(v) for v in self.basis],
            "witnesses_used": [_vec_strings(v) for v in self.witnesses_used],
            "lower_bound": self.lower_bound,
        }


# ---------------------------------------------------------------------------
# objective


def _esym_table(s: np.ndarray, m: int) -> np.ndarray:
    """Row i holds e_0..e_m of s[:i]; all terms nonnegative."""
    t = np.zeros((len(s) + 1, m + 1))
    t[0, 0] = 1.0
    for i, x in enumerate(s):
        t[i + 1] = t[i]
        t[i + 1, 1:] += x * t[i, :-1]
    return t


def _esym_grad(s: np.ndarray, m: int):
    """e_m(s) and the leave-one-out values e_{m-1}(s without s_i)."""
    pre = _esym_table(s, m)
    suf = _esym_table(s[::-1], m)[::-1]
    # e_{m-1} of s minus s_i = sum_t pre[i, t] * suf[i+1, m-1-t]
    loo = np.einsum("it,it->i", pre[:-1, :m], suf[1:, m - 1::-1])
    return pre[-1, m], loo


class _Objective:
    """f(p) = e_m(sigma(M(p))^2) with M(p) = sum_j p_j A_j, scale-normalized."""

    def __init__(self, mats: np.ndarray, m: int, complex_field: bool):
        self.A = mats  # shape (n1, d, d)
        self.m = m
        self.cx = complex_field
        self.n1 = mats.shape[0]

    def matrix(self, p):
        if self.cx:
            z = p[: self.n1] + 1j * p[self.n1:]
            return np.tensordot(z, self.A, axes=1)
        return np.tensordot(p, self.A, axes=1)

    def raw(self, p):
        M = self.matrix(p)
        U, s, Vh = np.linalg.svd(M)
        s2 = s * s
        m = self.m
        f, loo = _esym_grad(s2, m)
        coef = 2.0 * s * loo
        G = (U * coef) @ Vh
        w = np.tensordot(self.A, G, axes=([1, 2], [0, 1]))
        if self.cx:
            grad = np.concatenate([w.real, w.imag])
        else:
            grad = w.real
        return f, grad

    def __call__(self, p):
        """Scale-invariant value and gradient f(p)/|p|^(2m)."""
        f, g = self.raw(p)
        n2 = float(p @ p)
        scale = n2 ** self.m
        val = f / scale
        grad = g / scale - 2 * self.m * val * p / n2
        return val, grad


def _descend(obj, x0, free, target, sphere, max_iter=MAX_ITER):
    """Barzilai-Borwein gradient descent with Armijo backtracking.

    ``free`` is a boolean mask of movable coordinates.  With ``sphere`` the
    iterate is renormalized after each step (projected gradient on the unit
    sphere; the objective is scale invariant so this only fixes the gauge).
    """
    x = x0.copy()
    f, g = obj(x)
    g = np.where(free, g, 0.0)
    alpha = 1.0 / max(np.linalg.norm(g), 1e-300)
    checkpoint = f
    for it in range(max_iter):
        if f < target:
            break
        if it and it % 50 == 0:
            # stalled at a positive local minimum
            if f > 0.9 * checkpoint:
                break
            checkpoint = f
        gg = float(g @ g)
        if gg < 1e-300:
            break
        step = alpha
        for _ in range(50):
            xn = x - step * g
            if sphere:
                xn = xn / np.linalg.norm(xn)
            fn, gn = obj(xn)
            if fn <= f - 1e-4 * step * gg:
                break
            step *= 0.5
        else:
            break
        gn = np.where(free, gn, 0.0)
        s = xn - x
        y = gn - g
        sy = float(s @ y)
        alpha = float(s @ s) / sy if sy > 0 else step * 2.0
        alpha = min(max(alpha, 1e-12), 1e12)
        x, f, g = xn, fn, gn
    return x, f


def _first_layer_mats(a: CarnotAlgebra) -> np.ndarray:
    n1 = a.layer_dims[0]
    return np.array(
        [[[float(c) for c in row] for row in ad_matrix(a, a.basis_vector(j))] for j in range(n1)]
    )


# ---------------------------------------------------------------------------
# exact helpers


def _to_vector(a: CarnotAlgebra, coeffs: Sequence[Fraction]) -> GradedVector:
    return GradedVector(tuple(coeffs) + (ZERO,) * (a.dim - len(coeffs)))


def _exact_rank(a, params, cx):
    n1 = a.layer_dims[0]
    if cx:
        z = ComplexGradedVector(_to_vector(a, params[:n1]), _to_vector(a, params[n1:]))
        return element_rank_complex(a, z), z
    x = _to_vector(a, params)
    return element_rank(a, x), x


def first_layer_kernel(a: CarnotAlgebra) -> list[GradedVector]:
    """Exact basis of {v in V1 : [v, n] = 0}."""
    n1 = a.layer_dims[0]
    rows = []
    for j in range(a.dim):
        cols = [bracket(a, a.basis_vector(i), a.basis_vector(j)).coords for i in range(n1)]
        for k in range(a.dim):
            rows.append([cols[i][k] for i in range(n1)])
    rows = [r for r in rows if any(r)]
    return [_to_vector(a, v) for v in linalg.nullspace(rows, n1)]


def _basis_upper_bound(a: CarnotAlgebra):
    best = None
    for j in range(a.layer_dims[0]):
        r = element_rank(a, a.basis_vector(j))
        if best is None or r < best[0]:
            best = (r, a.basis_vector(j))
    return best


# ---------------------------------------------------------------------------
# rationalization


def _rationalize(a, obj, point, k, tol, budget):
    """Round a near-feasible unit vector to an exact witness of rank <= k."""
    cx = obj.cx
    n1 = obj.n1
    if cx:
        z = point[:n1] + 1j * point[n1:]
        j = int(np.argmax(np.abs(z) - 1e-12 * np.arange(n1)))
        z = z / z[j]
        x = np.concatenate([z.real, z.imag])
        fixed = np.zeros(2 * n1, bool)
        fixed[j] = fixed[n1 + j] = True
        x[n1 + j] = 0.0
    else:
        j = int(np.argmax(np.abs(point) - 1e-12 * np.arange(n1)))
        x = point / point[j]
        fixed = np.zeros(n1, bool)
        fixed[j] = True
    x[j] = 1.0
    target = tol * 1e-4

    def reminimize(x, fixed):
        if fixed.all():
            return x, obj(x)[0]
        return _descend(obj, x, ~fixed, target, sphere=False)

    def try_exact(vals):
        params = [v if isinstance(v, Fraction) else Fraction(v).limit_denominator(budget) for v in vals]
        r, w = _exact_rank(a, params, cx)
        if r <= k and w:
            return r, w
        return None

    def direct(x):
        for q in _DENOMS + (budget,):
            hit = try_exact([Fraction(float(v)).limit_denominator(q) for v in x])
            if hit:
                return hit
        return None

    order = [i for i in np.argsort(np.abs(x), kind="stable") if not fixed[i]]
    # sparsify: pin small coordinates to zero while the residual stays small
    for i in order:
        trial = x.copy()
        trial[i] = 0.0
        f2 = fixed.copy()
        f2[i] = True
        xn, fn = reminimize(trial, f2)
        if fn < tol:
            x, fixed = xn, f2
            x[i] = 0.0
    hit = direct(x)
    if hit:
        return hit
    # pin the remaining coordinates one at a time to nearby rationals
    values = {i: Fraction(0) if fixed[i] and x[i] == 0 else None for i in range(len(x))}
    values[j] = ONE
    for i in [i for i in np.argsort(np.abs(x), kind="stable") if not fixed[i]]:
        for q in _DENOMS + (budget,):
            c = Fraction(float(x[i])).limit_denominator(q)
            trial = x.copy()
            trial[i] = float(c)
            f2 = fixed.copy()
            f2[i] = True
            xn, fn = reminimize(trial, f2)
            if fn < tol:
                x, fixed = xn, f2
                values[i] = c
                break
        else:
            return None
    exact = [values[i] if values[i] is not None else Fraction(float(x[i])).limit_denominator(budget) for i in range(len(x))]
    return try_exact(exact)


# ---------------------------------------------------------------------------
# search


def _restart(obj, seed, k, idx, tol):
    rng = np.random.default_rng([seed, k, idx])
    n = obj.n1 * (2 if obj.cx else 1)
    x0 = rng.standard_normal(n)
    x0 /= np.linalg.norm(x0)
    x, f = _descend(obj, x0, np.ones(n, bool), tol * 1e-4, sphere=True)
    return f, idx, x


def _search_k(a, obj, k, restarts, seed, tol, budget, threads):
    """Run restarts in fixed batches; returns (best residual, witness or None, candidates)."""
    best = float("inf")
    candidates = []
    tried = set()
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for start in range(0, restarts, BATCH):
            idxs = range(start, min(start + BATCH, restarts))
            results = list(pool.map(lambda i: _restart(obj, seed, k, i, tol), idxs))
            for f, idx, x in results:
                best = min(best, f)
                if f < tol:
                    candidates.append((f, idx, x))
            candidates.sort(key=lambda t: (t[0], t[1]))
            for f, idx, x in candidates:
                if idx in tried:
                    continue
                tried.add(idx)
                hit = _rationalize(a, obj, x, k, tol, budget)
                if hit:
                    return 0.0, hit, candidates
            if candidates:
                return candidates[0][0], None, candidates
    return best, None, candidates


def min_rank_search(
    a: CarnotAlgebra,
    field: str = "real",
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    rationalize_budget: int = DEFAULT_BUDGET,
    tolerance: float = DEFAULT_TOLERANCE,
    max_rank: int | None = None,
) -> RankReport:
    """Estimate r1 (field='real') or r1C (field='complex').

    Deterministic for fixed (seed, restarts) regardless of thread count.
    """
    if field not in ("real", "complex"):
        raise ValueError("field must be 'real' or 'complex'")
    cx = field == "complex"
    kernel = first_layer_kernel(a)
    if kernel:
        w = kernel[0]
        return RankReport(field, 0, "exact", ComplexGradedVector.from_real(w) if cx else w)
    ub_rank, ub_vec = _basis_upper_bound(a)
    if max_rank is not None and max_rank < ub_rank:
        ub_rank_cap = max_rank + 1
    else:
        ub_rank_cap = ub_rank
    mats = _first_layer_mats(a)
    threads = thread_count()
    best_res = float("inf")
    for k in range(1, ub_rank_cap):
        obj = _Objective(mats, k + 1, cx)
        res, hit, cands = _search_k(a, obj, k, restarts, seed, tolerance, rationalize_budget, threads)
        best_res = min(best_res, res)
        if hit:
            r, w = hit
            return RankReport(field, r, "exact", w, 0.0, [c[2] for c in cands])
        if cands:
            f, _, x = cands[0]
            n1 = a.layer_dims[0]
            if cx:
                w = ComplexGradedVector.from_gaussian(
                    [GaussianRational(Fraction(float(x[i])), Fraction(float(x[n1 + i]))) for i in range(n1)]
                    + [GaussianRational()] * (a.dim - n1)
                )
            else:
                w = _to_vector(a, [Fraction(float(v)) for v in x])
            return RankReport(field, k, "numerical", w, float(f), [c[2] for c in cands])
    if max_rank is not None and max_rank < ub_rank:
        raise SearchInconclusive(f"no element of rank <= {max_rank} found", best_res)
    w = ComplexGradedVector.from_real(ub_vec) if cx else ub_vec
    return RankReport(field, ub_rank, "exact", w, 0.0)


# ---------------------------------------------------------------------------
# rank-one images and classes


def _normalize_line(coords):
    """Scale so the first nonzero coordinate is 1."""
    lead = next(c for c in coords if c)
    return [c / lead for c in coords]


def rank_one_image(a: CarnotAlgebra, x):
    """Generator of [x, n] for a rank-one x, first nonzero coordinate 1."""
    if isinstance(x, ComplexGradedVector):
        if element_rank_complex(a, x) != 1:
            raise RankNotOne(f"{x} does not have complex rank 1")
        for j in range(a.dim):
            img = complex_bracket(a, x, ComplexGradedVector.from_real(a.basis_vector(j)))
            if img:
                return ComplexGradedVector.from_gaussian(_normalize_line(img.gaussian()))
    if element_rank(a, x) != 1:
        raise RankNotOne(f"{x} does not have rank 1")
    for j in range(a.dim):
        img = bracket(a, x, a.basis_vector(j))
        if img:
            return GradedVector(tuple(_normalize_line(img.coords)))
    raise RankNotOne("zero image")  # pragma: no cover


def _realify(z: ComplexGradedVector) -> list:
    return list(z.real.coords) + list(z.imag.coords)


def _times_i(z: ComplexGradedVector) -> ComplexGradedVector:
    return ComplexGradedVector(-z.imag, z.real)


def complex_span_rank(vectors) -> int:
    """Rank over C of a family of complex vectors."""
    rows = []
    for z in vectors:
        rows.append(_realify(z))
        rows.append(_realify(_times_i(z)))
    return linalg.rank(rows) // 2 if rows else 0


def complex_independent_subset(vectors) -> list[int]:
    chosen, current = [], []
    for idx, z in enumerate(vectors):
        if complex_span_rank(current + [z]) > len(current):
            chosen.append(idx)
            current.append(z)
    return chosen


def extended_class(a: CarnotAlgebra, x):
    """Exact basis of {v in V1 : [v, n] contained in the image line of x}.

    For complex ``x`` the class is a complex subspace of V1 ⊗ C and the
    returned basis is independent over C.
    """
    n1 = a.layer_dims[0]
    Z = rank_one_image(a, x)
    brs = [[bracket(a, a.basis_vector(i), a.basis_vector(j)).coords for j in range(a.dim)] for i in range(n1)]
    rows = []
    if isinstance(Z, ComplexGradedVector):
        span = [_realify(Z), _realify(_times_i(Z))]
        ann = linalg.nullspace(span, 2 * a.dim)
        for phi in ann:
            p1, p2 = phi[: a.dim], phi[a.dim:]
            for j in range(a.dim):
                row = [sum((p1[k] * brs[i][j][k] for k in range(a.dim) if p1[k]), ZERO) for i in range(n1)]
                row += [sum((p2[k] * brs[i][j][k] for k in range(a.dim) if p2[k]), ZERO) for i in range(n1)]
                if any(row):
                    rows.append(row)
        sol = linalg.nullspace(rows, 2 * n1)
        vecs = [ComplexGradedVector(_to_vector(a, v[:n1]), _to_vector(a, v[n1:])) for v in sol]
        return [vecs[i] for i in complex_independent_subset(vecs)]
    ann = linalg.nullspace([list(Z.coords)], a.dim)
    for phi in ann:
        for j in range(a.dim):
            row = [sum((phi[k] * brs[i][j][k] for k in range(a.dim) if phi[k]), ZERO) for i in range(n1)]
            if any(row):
                rows.append(row)
    return [_to_vector(a, v) for v in linalg.nullspace(rows, n1)]


def _rank_of(a, x):
    return element_rank_complex(a, x) if isinstance(x, ComplexGradedVector) else element_rank(a, x)


def _bracket_any(a, x, y):
    if isinstance(x, ComplexGradedVector) or isinstance(y, ComplexGradedVector):
        if not isinstance(x, ComplexGradedVector):
            x = ComplexGradedVector.from_real(x)
        if not isinstance(y, ComplexGradedVector):
            y = ComplexGradedVector.from_real(y)
        return complex_bracket(a, x, y)
    return bracket(a, x, y)


def _span_basis(vectors):
    if not vectors:
        return []
    if isinstance(vectors[0], ComplexGradedVector):
        return [vectors[i] for i in complex_independent_subset(vectors)]
    return [vectors[i] for i in linalg.independent_subset([v.coords for v in vectors])]


def equivalence_classes(a: CarnotAlgebra, witnesses, expand: bool = False) -> EquivalenceClassDecomposition:
    """Group rank-one witnesses by image line and check closure and commutation.

    With ``expand`` each class is replaced by the full extended class of its
    first witness instead of the span of the supplied witnesses.
    """
    groups: list[tuple[list, object]] = []
    for w in witnesses:
        if _rank_of(a, w) != 1:
            raise WitnessNotRankOne(f"{w} does not have rank 1")
        Z = rank_one_image(a, w)
        for members, z in groups:
            if z == Z:
                members.append(w)
                break
        else:
            groups.append(([w], Z))
    classes = []
    for members, Z in groups:
        basis = extended_class(a, members[0]) if expand else _span_basis(members)
        # closure under addition inside a class
        acc = None
        for v in basis + members:
            acc = v if acc is None else acc + v
            if acc and _rank_of(a, acc) >= 1:
                if _rank_of(a, acc) != 1 or rank_one_image(a, acc) != Z:
                    raise PaperInvariantViolation("class not closed under addition")
        classes.append((basis, Z))
    for i in range(len(classes)):
        for j in range(i + 1, len(classes)):
            for u in classes[i][0]:
                for v in classes[j][0]:
                    if _bracket_any(a, u, v):
                        raise PaperInvariantViolation("rank-one elements with distinct image lines do not commute")
    n1 = a.layer_dims[0]
    covered = [v for basis, _ in classes for v in basis]
    residual = []
    if covered and isinstance(covered[0], ComplexGradedVector):
        current = list(covered)
        for i in range(n1):
            e = ComplexGradedVector.from_real(a.basis_vector(i))
            if complex_span_rank(current + [e]) > complex_span_rank(current):
                current.append(e)
                residual.append(e)
    else:
        rows = [v.coords for v in covered]
        std = [a.basis_vector(i).coords for i in range(n1)]
        residual = [a.basis_vector(i) for i in linalg.complete_basis(rows, std)]
    return EquivalenceClassDecomposition(classes, residual)


def harvest_witnesses(a: CarnotAlgebra, report: RankReport, tol: float = DEFAULT_TOLERANCE,
                      budget: int = DEFAULT_BUDGET) -> list:
    """Exact minimum-rank witnesses: the report witness, basis vectors, restart points.

    Restart points are rationalized lazily, stopping once the extended classes
    of the collected witnesses cover V1 (or V1 ⊗ C).
    """
    r = report.min_rank
    cx = report.field == "complex"
    n1 = a.layer_dims[0]
    out = []
    seen_lines = []

    def add(w):
        if _rank_of(a, w) != r:
            return
        if r == 1:
            Z = rank_one_image(a, w)
            if Z in seen_lines:
                return
            seen_lines.append(Z)
        out.append(w)

    def covered():
        if r != 1:
            return False
        vecs = [v for w in out for v in extended_class(a, w)]
        if cx:
            vecs += [v.conjugate() for v in vecs]
            return complex_span_rank(vecs) == n1
        return linalg.rank([v.coords for v in vecs]) == n1 if vecs else False

    if report.status == "exact" and report.witness is not None:
        add(report.witness)
    for j in range(n1):
        e = a.basis_vector(j)
        add(ComplexGradedVector.from_real(e) if cx else e)
    if covered() or not report.candidates:
        return out
    obj = _Objective(_first_layer_mats(a), r + 1, cx)
    for x in report.candidates:
        hit = _rationalize(a, obj, x, r, tol, budget)
        if hit and hit[0] == r:
            add(hit[1])
            if covered():
                break
    return out


def invariant_subspaces(a: CarnotAlgebra, report: RankReport, witnesses, expand: bool = False):
    """W1 (real) or (W1C, hatW1) (complex) spanned by the given witnesses.

    Results are lower bounds for the true subspaces.  ``expand`` replaces each
    rank-one witness by its extended class before taking spans.
    """
    ws = list(witnesses)
    if not ws:
        raise EmptyWitnessSet("no witnesses supplied")
    vecs = []
    for w in ws:
        if expand and _rank_of(a, w) == 1:
            vecs.extend(extended_class(a, w))
        else:
            vecs.append(w)
    if report.field == "real" and not any(isinstance(v, ComplexGradedVector) for v in vecs):
        return InvariantSubspace("W1", _span_basis(vecs), ws)
    vecs = [v if isinstance(v, ComplexGradedVector) else ComplexGradedVector.from_real(v) for v in vecs]
    wc = InvariantSubspace("W1C", _span_basis(vecs), ws)
    parts = [p for v in vecs for p in (v.real, v.imag) if p]
    hat = InvariantSubspace("hatW1", _span_basis(parts), ws)
    return wc, hat


def invariance_check(a: CarnotAlgebra, subspace, automorphisms) -> bool:
    """True iff every supplied graded automorphism maps the subspace into itself."""
    basis = subspace.basis if isinstance(subspace, InvariantSubspace) else list(subspace)
    mats = []
    for idx, M in enumerate(automorphisms):
        ok, why = verify_graded_automorphism(a, M)
        if not ok:
            raise NotAnAutomorphism(idx, why)
        mats.append([[linalg.as_fraction(c) for c in row] for row in M])
    cx = any(isinstance(v, ComplexGradedVector) for v in basis)
    for M in mats:
        for v in basis:
            if cx:
                z = v if isinstance(v, ComplexGradedVector) else ComplexGradedVector.from_real(v)
                img = ComplexGradedVector(apply_matrix(M, z.real), apply_matrix(M, z.imag))
                cur = [b if isinstance(b, ComplexGradedVector) else ComplexGradedVector.from_real(b) for b in basis]
                if complex_span_rank(cur + [img]) != complex_span_rank(cur):
                    return False
            elif not linalg.in_span([b.coords for b in basis], apply_matrix(M, v).coords):
                return False
    return True
