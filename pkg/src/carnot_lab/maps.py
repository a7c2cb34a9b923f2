"""BiLipschitz shear maps built from a rank-one first-layer element.

Given e2 of rank one, a normal basis e1, e2, ..., e_{n+1}, U_1..U_s, K is
built around it, and a Lipschitz profile h gives the map

    F_h(x) = x * sum_{j=2}^{n+1} h_j(x_1) e_j,    h_2 = h, h_j = -∫_0^x h_{j-1},

with x_1 the e1-coordinate of x.  Profiles are exact piecewise polynomials so
every identity can be checked in rational arithmetic; distortion is measured
on float samples.
"""
from __future__ import annotations

import bisect
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import linalg
from .algebra import CarnotAlgebra, GradedVector, bracket, element_rank
from .bch import BCHEngine, derive_c_constants
from .catalog import filiform
from .exceptions import (
    BasisConstructionFailure,
    CarnotError,
    DegenerateSample,
    DimensionMismatch,
    NotFiliform,
    PaperInvariantViolation,
    PreconditionViolation,
    RankNotOne,
)
from .linalg import ZERO, as_fraction
from .metric import HomogeneousMetric, ball_sample_array

# ---------------------------------------------------------------------------
# piecewise polynomials


def _poly_eval(coeffs, x):
    acc = ZERO if isinstance(x, Fraction) else 0.0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _trim(coeffs):
    c = list(coeffs)
    while len(c) > 1 and not c[-1]:
        c.pop()
    return c or [ZERO]


@dataclass(frozen=True)
class PiecewisePolynomial:
    """Continuous piecewise polynomial in the global variable x.

    ``segments[k]`` holds ascending coefficients on [b_k, b_{k+1}]; the first
    and last segments extend to -inf and +inf.  With no breakpoints there is a
    single global polynomial.
    """

    breakpoints: tuple
    segments: tuple

    def __post_init__(self):
        bps = tuple(as_fraction(b) for b in self.breakpoints)
        segs = tuple(tuple(_trim(as_fraction(c) for c in s)) for s in self.segments)
        expected = max(len(bps) - 1, 1)
        if len(segs) != expected:
            raise CarnotError(f"{len(bps)} breakpoints need {expected} segments, got {len(segs)}")
        if any(b >= c for b, c in zip(bps, bps[1:])):
            raise CarnotError("breakpoints must be strictly increasing")
        for k in range(len(segs) - 1):
            b = bps[k + 1]
            if _poly_eval(segs[k], b) != _poly_eval(segs[k + 1], b):
                raise CarnotError(f"discontinuity at breakpoint {b}")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "segments", segs)

    @classmethod
    def polynomial(cls, coeffs) -> "PiecewisePolynomial":
        return cls((), (tuple(coeffs),))

    @classmethod
    def from_dict(cls, data) -> "PiecewisePolynomial":
        try:
            return cls(tuple(str(b) for b in data.get("breakpoints", [])),
                       tuple(tuple(str(c) for c in s) for s in data["segments"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise CarnotError(f"malformed piecewise polynomial: {exc}") from exc

    @classmethod
    def load(cls, path) -> "PiecewisePolynomial":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {"breakpoints": [str(b) for b in self.breakpoints],
                "segments": [[str(c) for c in s] for s in self.segments]}

    def _interior(self):
        return self.breakpoints[1:-1]

    def segment_index(self, x) -> int:
        return bisect.bisect_right(self._interior(), x)

    def __call__(self, x) -> Fraction:
        x = as_fraction(x)
        return _poly_eval(self.segments[self.segment_index(x)], x)

    def evaluate_float(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(np.array([float(b) for b in self._interior()]), x, side="right")
        out = np.zeros_like(x)
        for k, seg in enumerate(self.segments):
            mask = idx == k
            if mask.any():
                out[mask] = np.polyval([float(c) for c in reversed(seg)], x[mask])
        return out

    def __neg__(self) -> "PiecewisePolynomial":
        return PiecewisePolynomial(self.breakpoints, tuple(tuple(-c for c in s) for s in self.segments))

    @property
    def degree(self) -> int:
        return max(len(s) - 1 for s in self.segments)

    def negative_antiderivative(self) -> "PiecewisePolynomial":
        """x -> -∫_0^x self, continuous across breakpoints."""
        prims = [[ZERO] + [c / (k + 1) for k, c in enumerate(s)] for s in self.segments]
        start = self.segment_index(ZERO)
        prims[start][0] -= _poly_eval(prims[start], ZERO)
        bps = self.breakpoints
        for k in range(start + 1, len(prims)):
            b = bps[k]
            prims[k][0] += _poly_eval(prims[k - 1], b) - _poly_eval(prims[k], b)
        for k in range(start - 1, -1, -1):
            b = bps[k + 1]
            prims[k][0] += _poly_eval(prims[k + 1], b) - _poly_eval(prims[k], b)
        return PiecewisePolynomial(bps, tuple(tuple(-c for c in p) for p in prims))


def antiderivative_chain(h: PiecewisePolynomial, n: int) -> list[PiecewisePolynomial]:
    """[h_2, ..., h_{n+1}] with h_2 = h and h_j = -∫_0^x h_{j-1}."""
    if n < 1:
        raise ValueError("n must be at least 1")
    chain = [h]
    for _ in range(n - 1):
        chain.append(chain[-1].negative_antiderivative())
    return chain


# ---------------------------------------------------------------------------
# normal basis


@dataclass
class OttazziBasis:
    algebra: CarnotAlgebra
    e: list  # e_1 .. e_{n+1}
    U: list
    K_basis: list
    coefficient_functional: list

    @property
    def n(self) -> int:
        return len(self.e) - 1

    @property
    def s(self) -> int:
        return len(self.U)

    def x1(self, x: GradedVector) -> Fraction:
        return sum((c * v for c, v in zip(self.coefficient_functional, x.coords) if c), ZERO)

    def x1_array(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, float) @ np.array([float(c) for c in self.coefficient_functional])

    def basis(self) -> list:
        return list(self.e) + list(self.U) + list(self.K_basis)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "e": [v.to_strings() for v in self.e],
            "U": [v.to_strings() for v in self.U],
            "K": [v.to_strings() for v in self.K_basis],
            "x1": [str(c) for c in self.coefficient_functional],
        }


def _fail(msg):
    raise BasisConstructionFailure(msg)


def check_ottazzi_invariants(b: OttazziBasis) -> None:
    a = b.algebra
    e = b.e
    n = b.n
    for i in range(1, n):
        if bracket(a, e[0], e[i]) != e[i + 1]:
            _fail(f"[e1, e{i + 1}] != e{i + 2}")
    basis_vecs = [a.basis_vector(i) for i in range(a.dim)]
    if any(bracket(a, v, e[n]) for v in basis_vecs):
        _fail(f"e{n + 1} is not central")
    ideal = [v.coords for v in e[1:]]
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            if bracket(a, e[i], e[j]):
                _fail(f"[e{i + 1}, e{j + 1}] != 0")
        for v in basis_vecs:
            if not linalg.in_span(ideal, bracket(a, v, e[i]).coords):
                _fail(f"[b, e{i + 1}] leaves the ideal")
        for t, u in enumerate(b.U):
            if bracket(a, e[i], u):
                _fail(f"[e{i + 1}, U{t + 1}] != 0")
    full = b.basis()
    if len(full) != a.dim or linalg.rank([v.coords for v in full]) != a.dim:
        _fail("e, U, K do not form a basis")
    n1 = a.layer_dims[0]
    for v in [e[0], e[1]] + list(b.U):
        if any(v.coords[n1:]):
            _fail("e1, e2 and U must lie in the first layer")
    for v in full:
        layers = {a.layer_of[i] for i, c in enumerate(v.coords) if c}
        if len(layers) != 1:
            _fail("basis vector is not homogeneous")


def ottazzi_basis(a: CarnotAlgebra, e2: GradedVector) -> OttazziBasis:
    """Normal basis around a rank-one first-layer vector e2."""
    a.check(e2)
    n1 = a.layer_dims[0]
    if any(e2.coords[n1:]) or element_rank(a, e2) != 1:
        raise RankNotOne(f"{e2} is not a rank-one first-layer vector")
    e1 = next(a.basis_vector(i) for i in range(n1) if bracket(a, a.basis_vector(i), e2))
    e = [e1, e2]
    while True:
        nxt = bracket(a, e1, e[-1])
        if nxt.is_zero():
            break
        e.append(nxt)
    # solutions u in V1 of [e_j, u] = 0 for j = 2..n+1
    rows = []
    for ej in e[1:]:
        cols = [bracket(a, ej, a.basis_vector(i)).coords for i in range(n1)]
        rows.extend([cols[i][k] for i in range(n1)] for k in range(a.dim))
    rows = [r for r in rows if any(r)]
    sol = linalg.nullspace(rows, n1)
    sol_full = [list(v) + [ZERO] * (a.dim - n1) for v in sol]
    pick = linalg.complete_basis([e1.coords, e2.coords], sol_full)
    U = [GradedVector(tuple(sol_full[i])) for i in pick]
    if len(U) != n1 - 2:
        _fail("no complement of span(e1, e2) commutes with e2..e_{n+1}")
    current = [v.coords for v in e + U]
    std = [a.basis_vector(i).coords for i in range(a.dim)]
    K = [a.basis_vector(i) for i in linalg.complete_basis(current, std)]
    full = e + U + K
    B = [[v.coords[r] for v in full] for r in range(a.dim)]
    functional = linalg.inverse(B)[0]
    basis = OttazziBasis(a, e, U, K, list(functional))
    check_ottazzi_invariants(basis)
    return basis


# ---------------------------------------------------------------------------
# maps


def _shear(basis: OttazziBasis, chain: Sequence[PiecewisePolynomial], t: Fraction) -> GradedVector:
    y = basis.algebra.zero()
    for h, ej in zip(chain, basis.e[1:]):
        v = h(t)
        if v:
            y = y + ej * v
    return y


def _check_chain(basis, chain):
    if len(chain) != basis.n:
        raise PreconditionViolation(f"chain has {len(chain)} functions, basis needs {basis.n}")


def apply_F_h(a: CarnotAlgebra, basis: OttazziBasis, chain, x: GradedVector, engine: BCHEngine | None = None):
    _check_chain(basis, chain)
    if len(x) != a.dim:
        raise DimensionMismatch(f"vector of length {len(x)} in a {a.dim}-dimensional algebra")
    engine = engine or BCHEngine(a)
    return engine.product(x, _shear(basis, chain, basis.x1(x)))


def _is_model_filiform(a: CarnotAlgebra) -> bool:
    n = a.step
    return n >= 2 and list(a.layer_dims) == [2] + [1] * (n - 1) and a.structure == filiform(n).structure


def apply_G_h(f: CarnotAlgebra, chain, p: GradedVector) -> GradedVector:
    """F_h on the model filiform algebra with its canonical basis."""
    if not _is_model_filiform(f):
        raise NotFiliform("algebra is not a model filiform algebra")
    basis = ottazzi_basis(f, f.basis_vector(1))
    return apply_F_h(f, basis, chain, p)


def translation_remainder(a, basis, chain, x, xt) -> GradedVector:
    """Y with (-F_h(x)) * F_h(x~) = (-x) * x~ + Y, from the closed form."""
    e1 = basis.e[0]
    x1, xt1 = basis.x1(x), basis.x1(xt)
    delta = xt1 - x1
    y = _shear(basis, chain, x1)
    yt = _shear(basis, chain, xt1)
    Y = (yt - y) + bracket(a, e1, yt + y) * (delta / 2)
    if a.step > 2:
        cs = derive_c_constants(a.step)
        for j in range(2, a.step):
            if not cs[j - 1]:
                continue
            term = yt - y * ((-1) ** j)
            for _ in range(j):
                term = bracket(a, e1, term)
            Y = Y + term * (cs[j - 1] * delta**j)
    return Y


def verify_translation_identity(a, basis, chain, x, x_tilde, engine: BCHEngine | None = None) -> bool:
    """Both sides of the translation identity, evaluated exactly."""
    _check_chain(basis, chain)
    engine = engine or BCHEngine(a)
    fx = apply_F_h(a, basis, chain, x, engine)
    fxt = apply_F_h(a, basis, chain, x_tilde, engine)
    lhs = engine.product(-fx, fxt)
    rhs = engine.product(-x, x_tilde) + translation_remainder(a, basis, chain, x, x_tilde)
    if lhs != rhs:
        raise PaperInvariantViolation("translation identity fails")
    return True


class IdentityMap:
    name = "identity"

    def __call__(self, x):
        return x

    def batch(self, X):
        return np.asarray(X, float)


class DilationMap:
    name = "dilation"

    def __init__(self, algebra: CarnotAlgebra, t):
        self.algebra = algebra
        self.t = as_fraction(t)
        self._scale = np.array([float(self.t) ** algebra.layer_of[i] for i in range(algebra.dim)])

    def __call__(self, x):
        from .algebra import dilate

        return dilate(self.algebra, self.t, x)

    def batch(self, X):
        return np.asarray(X, float) * self._scale


class FhMap:
    name = "fh"

    def __init__(self, basis: OttazziBasis, h: PiecewisePolynomial):
        self.basis = basis
        self.algebra = basis.algebra
        self.chain = antiderivative_chain(h, basis.n)
        self.engine = BCHEngine(self.algebra)
        self._e = np.array([v.as_float() for v in basis.e[1:]])

    def __call__(self, x):
        return apply_F_h(self.algebra, self.basis, self.chain, x, self.engine)

    def batch(self, X):
        X = np.asarray(X, float)
        t = self.basis.x1_array(X)
        coeffs = np.stack([h.evaluate_float(t) for h in self.chain], axis=1)
        return self.engine.product_float(X, coeffs @ self._e)


# ---------------------------------------------------------------------------
# distortion


def distortion_estimate(m: HomogeneousMetric, fmap, n_pairs: int, scale_sweep=(0.25, 1.0, 4.0), seed: int = 0) -> dict:
    """Extremes of d(F x, F y) / d(x, y) over sampled pairs at each scale.

    At scale s base points come from the ball B(0, s) and partners from
    B(x, s).  Pairs with d(x, y) = 0 are skipped and redrawn.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be at least 1")
    table = []
    skipped = 0
    for idx, s in enumerate(scale_sweep):
        rng = np.random.default_rng([seed, idx])
        ratios = []
        have = 0
        for _ in range(100):
            need = n_pairs - have
            if need <= 0:
                break
            X = ball_sample_array(m, s, need, rng)
            Y = m.engine.product_float(X, ball_sample_array(m, s, need, rng))
            d = m.distance_array(X, Y)
            keep = d > 0
            skipped += int((~keep).sum())
            if keep.any():
                dF = m.distance_array(fmap.batch(X[keep]), fmap.batch(Y[keep]))
                ratios.append(dF / d[keep])
                have += int(keep.sum())
        if have < n_pairs:
            raise DegenerateSample(f"could not draw {n_pairs} nondegenerate pairs at scale {s}")
        r = np.concatenate(ratios)
        table.append({"scale": float(s), "min_ratio": float(r.min()), "max_ratio": float(r.max())})
    return {
        "min_ratio": min(t["min_ratio"] for t in table),
        "max_ratio": max(t["max_ratio"] for t in table),
        "per_scale": table,
        "pairs_per_scale": n_pairs,
        "skipped": skipped,
    }
