"""Carnot algebras with exact rational structure constants.

Basis vectors are indexed from 0 internally and grouped layer by layer:
layer 1 occupies the first ``layer_dims[0]`` indices, layer 2 the next block,
and so on.  The JSON file format uses 1-based indices.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import linalg
from .exceptions import (
    CarnotError,
    DimensionMismatch,
    GenerationFailure,
    GradingViolation,
    JacobiViolation,
    NotCentral,
    NotIndependent,
    QuotientNotCarnot,
    ZeroDilation,
)
from .linalg import ZERO, GaussianRational, as_fraction


@dataclass(frozen=True)
class GradedVector:
    """Element of a Carnot algebra in basis coordinates."""

    coords: tuple

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(as_fraction(c) for c in self.coords))

    @classmethod
    def zero(cls, dim: int) -> "GradedVector":
        return cls((ZERO,) * dim)

    @classmethod
    def basis(cls, dim: int, i: int, scale=1) -> "GradedVector":
        c = [ZERO] * dim
        c[i] = as_fraction(scale)
        return cls(tuple(c))

    @classmethod
    def parse(cls, text: str) -> "GradedVector":
        """Parse a comma-separated list of rationals such as ``"1,0,1/2"``."""
        return cls(tuple(Fraction(t.strip()) for t in text.split(",") if t.strip()))

    def __len__(self):
        return len(self.coords)

    def __iter__(self):
        return iter(self.coords)

    def __getitem__(self, i):
        return self.coords[i]

    def _check(self, other):
        if len(other.coords) != len(self.coords):
            raise DimensionMismatch(f"vector lengths {len(self.coords)} and {len(other.coords)} differ")

    def __add__(self, other: "GradedVector") -> "GradedVector":
        self._check(other)
        return GradedVector(tuple(a + b for a, b in zip(self.coords, other.coords)))

    def __sub__(self, other: "GradedVector") -> "GradedVector":
        self._check(other)
        return GradedVector(tuple(a - b for a, b in zip(self.coords, other.coords)))

    def __neg__(self) -> "GradedVector":
        return GradedVector(tuple(-a for a in self.coords))

    def __mul__(self, t) -> "GradedVector":
        t = as_fraction(t)
        return GradedVector(tuple(a * t for a in self.coords))

    __rmul__ = __mul__

    def __bool__(self):
        return any(self.coords)

    def is_zero(self) -> bool:
        return not any(self.coords)

    def to_strings(self) -> list[str]:
        return [str(c) for c in self.coords]

    def __str__(self):
        return ",".join(self.to_strings())

    def as_float(self) -> np.ndarray:
        return np.array([float(c) for c in self.coords])


@dataclass(frozen=True)
class ComplexGradedVector:
    """Element of the complexification, stored as real and imaginary parts."""

    real: GradedVector
    imag: GradedVector

    def __post_init__(self):
        if len(self.real) != len(self.imag):
            raise DimensionMismatch("real and imaginary parts differ in length")

    @classmethod
    def from_real(cls, x: GradedVector) -> "ComplexGradedVector":
        return cls(x, GradedVector.zero(len(x)))

    @classmethod
    def from_gaussian(cls, coords: Sequence[GaussianRational]) -> "ComplexGradedVector":
        coords = [GaussianRational.of(c) for c in coords]
        return cls(GradedVector(tuple(c.re for c in coords)), GradedVector(tuple(c.im for c in coords)))

    def gaussian(self) -> list[GaussianRational]:
        return [GaussianRational(a, b) for a, b in zip(self.real, self.imag)]

    def conjugate(self) -> "ComplexGradedVector":
        return ComplexGradedVector(self.real, -self.imag)

    def __len__(self):
        return len(self.real)

    def __add__(self, o):
        return ComplexGradedVector(self.real + o.real, self.imag + o.imag)

    def __sub__(self, o):
        return ComplexGradedVector(self.real - o.real, self.imag - o.imag)

    def __neg__(self):
        return ComplexGradedVector(-self.real, -self.imag)

    def scale(self, c) -> "ComplexGradedVector":
        c = GaussianRational.of(c)
        return ComplexGradedVector(
            self.real * c.re - self.imag * c.im,
            self.real * c.im + self.imag * c.re,
        )

    def __bool__(self):
        return bool(self.real) or bool(self.imag)

    def is_real(self) -> bool:
        return self.imag.is_zero()

    def __str__(self):
        return ",".join(str(c) for c in self.gaussian())


class CarnotAlgebra:
    """A stratified nilpotent Lie algebra with a layer-contiguous basis.

    Instances are treated as immutable.  Construct them with :func:`build_algebra`,
    which runs the full validation suite; the constructor itself only stores data.
    """

    def __init__(self, layer_dims: Sequence[int], structure: Mapping, name: str | None = None):
        self.layer_dims = tuple(int(d) for d in layer_dims)
        self.dim = sum(self.layer_dims)
        self.step = len(self.layer_dims)
        # (i, j) with i < j -> {k: coefficient}, zero entries dropped
        self._structure = {
            key: dict(val) for key, val in structure.items() if any(val.values())
        }
        self.name = name
        offsets = [0]
        for d in self.layer_dims:
            offsets.append(offsets[-1] + d)
        self.offsets = tuple(offsets)
        layer_of = []
        for layer, d in enumerate(self.layer_dims, start=1):
            layer_of.extend([layer] * d)
        self.layer_of = tuple(layer_of)

    @property
    def structure(self) -> dict:
        return {k: dict(v) for k, v in self._structure.items()}

    def layer_indices(self, layer: int) -> range:
        """Basis indices of layer ``layer`` (1-based layer number)."""
        if layer < 1 or layer > self.step:
            return range(0)
        return range(self.offsets[layer - 1], self.offsets[layer])

    def layer_part(self, x: GradedVector, layer: int) -> tuple:
        return tuple(x.coords[i] for i in self.layer_indices(layer))

    def layer_projection(self, x: GradedVector, layer: int) -> GradedVector:
        idx = set(self.layer_indices(layer))
        return GradedVector(tuple(c if i in idx else ZERO for i, c in enumerate(x.coords)))

    def basis_vector(self, i: int, scale=1) -> GradedVector:
        return GradedVector.basis(self.dim, i, scale)

    def zero(self) -> GradedVector:
        return GradedVector.zero(self.dim)

    def vector(self, coords) -> GradedVector:
        v = GradedVector(tuple(coords))
        self.check(v)
        return v

    def check(self, x: GradedVector):
        if len(x) != self.dim:
            raise DimensionMismatch(f"vector of length {len(x)} in algebra of dimension {self.dim}")

    def basis_bracket(self, i: int, j: int) -> dict:
        """[b_i, b_j] as a sparse dict."""
        if i == j:
            return {}
        if i < j:
            return self._structure.get((i, j), {})
        return {k: -c for k, c in self._structure.get((j, i), {}).items()}

    def is_abelian(self) -> bool:
        return not self._structure

    def hausdorff_dimension(self) -> int:
        return sum(i * d for i, d in enumerate(self.layer_dims, start=1))

    @cached_property
    def _sparse_rows(self):
        # i -> list of (j, {k: c}) for all j with [b_i, b_j] != 0
        rows = {i: [] for i in range(self.dim)}
        for (i, j), val in self._structure.items():
            rows[i].append((j, val))
            rows[j].append((i, {k: -c for k, c in val.items()}))
        return rows

    @cached_property
    def structure_tensor(self) -> np.ndarray:
        """Dense float tensor ``C[i, j, k]`` with ``[b_i, b_j] = sum_k C[i,j,k] b_k``."""
        c = np.zeros((self.dim, self.dim, self.dim))
        for (i, j), val in self._structure.items():
            for k, v in val.items():
                c[i, j, k] = float(v)
                c[j, i, k] = -float(v)
        return c

    def __eq__(self, other):
        if not isinstance(other, CarnotAlgebra):
            return NotImplemented
        return self.layer_dims == other.layer_dims and self._structure == other._structure

    def __hash__(self):
        return hash((self.layer_dims, tuple(sorted((k, tuple(sorted(v.items()))) for k, v in self._structure.items()))))

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"<CarnotAlgebra{label} layers={list(self.layer_dims)}>"


# ---------------------------------------------------------------------------
# construction and validation


def _normalize_table(dim: int, bracket_table) -> dict:
    table: dict = {}
    items = bracket_table.items() if isinstance(bracket_table, Mapping) else bracket_table
    for key, out in items:
        i, j = key
        if not (0 <= i < dim and 0 <= j < dim):
            raise CarnotError(f"bracket index pair ({i + 1}, {j + 1}) out of range for dimension {dim}")
        if i == j:
            raise CarnotError(f"[b{i + 1}, b{i + 1}] must vanish")
        out = {int(k): as_fraction(c) for k, c in dict(out).items()}
        for k in out:
            if not 0 <= k < dim:
                raise CarnotError(f"bracket output index {k + 1} out of range")
        sign = 1
        if i > j:
            i, j, sign = j, i, -1
        if (i, j) in table:
            raise CarnotError(f"bracket [b{i + 1}, b{j + 1}] given twice")
        table[(i, j)] = {k: sign * c for k, c in out.items() if c}
    return table


def _check_grading(a: CarnotAlgebra):
    for (i, j), val in a._structure.items():
        target = a.layer_of[i] + a.layer_of[j]
        for k in val:
            if a.layer_of[k] != target:
                raise GradingViolation(i, j, f"component on b{k + 1} in layer {a.layer_of[k]}, expected {target}")


def _check_jacobi(a: CarnotAlgebra):
    zero = a.zero()
    basis = [a.basis_vector(i) for i in range(a.dim)]
    for i, j, k in combinations(range(a.dim), 3):
        if a.layer_of[i] + a.layer_of[j] + a.layer_of[k] > a.step:
            continue
        bi, bj, bk = basis[i], basis[j], basis[k]
        total = (
            bracket(a, bi, bracket(a, bj, bk))
            + bracket(a, bj, bracket(a, bk, bi))
            + bracket(a, bk, bracket(a, bi, bj))
        )
        if total != zero:
            raise JacobiViolation(i, j, k)


def _check_generation(a: CarnotAlgebra):
    for layer in range(1, a.step):
        target = list(a.layer_indices(layer + 1))
        rows = []
        for i in a.layer_indices(1):
            for j in a.layer_indices(layer):
                out = a.basis_bracket(i, j)
                if out:
                    rows.append([out.get(k, ZERO) for k in target])
        if linalg.rank(rows) != len(target):
            raise GenerationFailure(layer, f"rank {linalg.rank(rows)} < dim V{layer + 1} = {len(target)}")


def build_algebra(layer_dims: Sequence[int], bracket_table, name: str | None = None) -> CarnotAlgebra:
    """Build and validate a Carnot algebra.

    ``bracket_table`` maps 0-based index pairs ``(i, j)`` to sparse outputs
    ``{k: coefficient}``.  Pairs with ``i > j`` are accepted and antisymmetrized.
    Raises GradingViolation, JacobiViolation or GenerationFailure.
    """
    dims = [int(d) for d in layer_dims]
    while dims and dims[-1] == 0:
        dims.pop()
    if not dims:
        raise GenerationFailure(0, "algebra must have a non-trivial first layer")
    for n, d in enumerate(dims, start=1):
        if d <= 0:
            raise GenerationFailure(n - 1 if n > 1 else 0, f"layer {n} is empty below a non-empty layer")
    table = _normalize_table(sum(dims), bracket_table)
    a = CarnotAlgebra(dims, table, name=name)
    _check_grading(a)
    _check_jacobi(a)
    _check_generation(a)
    return a


# ---------------------------------------------------------------------------
# brackets and ranks


def bracket(a: CarnotAlgebra, x: GradedVector, y: GradedVector) -> GradedVector:
    """Exact bilinear extension of the structure table."""
    a.check(x)
    a.check(y)
    out = [ZERO] * a.dim
    ys = [(j, c) for j, c in enumerate(y.coords) if c]
    if not ys:
        return GradedVector(tuple(out))
    ymap = dict(ys)
    rows = a._sparse_rows
    for i, xi in enumerate(x.coords):
        if not xi:
            continue
        for j, val in rows[i]:
            yj = ymap.get(j)
            if yj is None:
                continue
            f = xi * yj
            for k, c in val.items():
                out[k] += f * c
    return GradedVector(tuple(out))


def ad_power(a: CarnotAlgebra, x: GradedVector, y: GradedVector, n: int) -> GradedVector:
    """(ad x)^n y."""
    for _ in range(n):
        if y.is_zero():
            break
        y = bracket(a, x, y)
    return y


def ad_matrix(a: CarnotAlgebra, x: GradedVector) -> list[list[Fraction]]:
    """Matrix of ad(x); column j is [x, b_j]."""
    a.check(x)
    cols = [bracket(a, x, a.basis_vector(j)).coords for j in range(a.dim)]
    return [[cols[j][i] for j in range(a.dim)] for i in range(a.dim)]


def element_rank(a: CarnotAlgebra, x: GradedVector) -> int:
    return linalg.rank(ad_matrix(a, x))


def complex_bracket(a: CarnotAlgebra, z: ComplexGradedVector, w: ComplexGradedVector) -> ComplexGradedVector:
    re = bracket(a, z.real, w.real) - bracket(a, z.imag, w.imag)
    im = bracket(a, z.real, w.imag) + bracket(a, z.imag, w.real)
    return ComplexGradedVector(re, im)


def _complex_block(a: CarnotAlgebra, z: ComplexGradedVector):
    A = ad_matrix(a, z.real)
    B = ad_matrix(a, z.imag)
    top = [ra + [-b for b in rb] for ra, rb in zip(A, B)]
    bottom = [rb + ra for ra, rb in zip(A, B)]
    return top + bottom


def element_rank_complex(a: CarnotAlgebra, z: ComplexGradedVector) -> int:
    """Rank over C of ad(z), via the real block embedding [[A, -B], [B, A]]."""
    a.check(z.real)
    a.check(z.imag)
    if z.imag.is_zero():
        return element_rank(a, z.real)
    r = linalg.rank(_complex_block(a, z))
    assert r % 2 == 0
    return r // 2


def dilate(a: CarnotAlgebra, t, x: GradedVector) -> GradedVector:
    t = as_fraction(t)
    if not t:
        raise ZeroDilation("dilation factor must be nonzero")
    a.check(x)
    return GradedVector(tuple(c * t ** a.layer_of[i] for i, c in enumerate(x.coords)))


def dilation_matrix(a: CarnotAlgebra, t) -> list[list[Fraction]]:
    t = as_fraction(t)
    if not t:
        raise ZeroDilation("dilation factor must be nonzero")
    return [[t ** a.layer_of[i] if i == j else ZERO for j in range(a.dim)] for i in range(a.dim)]


# ---------------------------------------------------------------------------
# direct sums and quotients


def direct_sum_embeddings(a: CarnotAlgebra, b: CarnotAlgebra):
    """Index maps sending basis indices of ``a`` and ``b`` into ``a ⊕ b``."""
    r = max(a.step, b.step)
    dims_a = list(a.layer_dims) + [0] * (r - a.step)
    dims_b = list(b.layer_dims) + [0] * (r - b.step)
    map_a, map_b = {}, {}
    pos = 0
    for layer in range(r):
        for t in range(dims_a[layer]):
            map_a[a.offsets[layer] + t] = pos
            pos += 1
        for t in range(dims_b[layer]):
            map_b[b.offsets[layer] + t] = pos
            pos += 1
    return [x + y for x, y in zip(dims_a, dims_b)], map_a, map_b


def direct_sum(a: CarnotAlgebra, b: CarnotAlgebra, name: str | None = None) -> CarnotAlgebra:
    """Block-diagonal sum; layers of the shorter summand are padded with zeros."""
    dims, map_a, map_b = direct_sum_embeddings(a, b)
    table = {}
    for src, m in ((a, map_a), (b, map_b)):
        for (i, j), val in src._structure.items():
            table[(m[i], m[j])] = {m[k]: c for k, c in val.items()}
    return build_algebra(dims, table, name=name)


def embed(x: GradedVector, index_map: Mapping[int, int], dim: int) -> GradedVector:
    out = [ZERO] * dim
    for i, c in enumerate(x.coords):
        out[index_map[i]] = c
    return GradedVector(tuple(out))


def central_quotient(a: CarnotAlgebra, V_basis: Sequence[GradedVector]):
    """Quotient by a central subspace of the second layer.

    Returns ``(quotient, projection)`` where ``projection`` is a
    ``quotient.dim x a.dim`` rational matrix.  The complement of V in V2 is
    spanned by the lowest-index standard basis vectors independent of V.
    """
    if a.step < 2:
        if V_basis:
            raise NotCentral("algebra has no second layer")
        return a, linalg.identity(a.dim)
    l2 = list(a.layer_indices(2))
    vs = []
    for v in V_basis:
        a.check(v)
        if any(c for i, c in enumerate(v.coords) if a.layer_of[i] != 2):
            raise NotCentral(f"{v} is not supported in the second layer")
        for i in range(a.dim):
            if bracket(a, a.basis_vector(i), v):
                raise NotCentral(f"[b{i + 1}, {v}] != 0")
        vs.append([v.coords[k] for k in l2])
    if linalg.rank(vs) != len(vs):
        raise NotIndependent("quotient subspace basis is linearly dependent")
    std = [[linalg.ONE if t == s else ZERO for t in range(len(l2))] for s in range(len(l2))]
    keep = linalg.complete_basis(vs, std)  # positions within layer 2
    # coordinates of e_s in the basis (V, kept standard vectors)
    new_basis = vs + [std[s] for s in keep]
    coeff_rows = []
    for s in range(len(l2)):
        c = linalg.solve_in_span(new_basis, std[s])
        coeff_rows.append(c[len(vs):])
    # projection matrix
    new_index = {}
    pos = 0
    dims = []
    for layer in range(1, a.step + 1):
        cnt = 0
        if layer == 2:
            for s in keep:
                new_index[l2[s]] = pos
                pos += 1
                cnt += 1
        else:
            for i in a.layer_indices(layer):
                new_index[i] = pos
                pos += 1
                cnt += 1
        dims.append(cnt)
    ndim = pos
    proj = [[ZERO] * a.dim for _ in range(ndim)]
    for i in range(a.dim):
        if a.layer_of[i] == 2:
            s = l2.index(i)
            for t, kk in enumerate(keep):
                proj[new_index[l2[kk]]][i] = coeff_rows[s][t]
        else:
            proj[new_index[i]][i] = linalg.ONE

    def project(v: GradedVector) -> dict:
        out = linalg.matvec(proj, v.coords)
        return {k: c for k, c in enumerate(out) if c}

    lift = {n: o for o, n in new_index.items()}
    table = {}
    for p in range(ndim):
        for q in range(p + 1, ndim):
            img = project(bracket(a, a.basis_vector(lift[p]), a.basis_vector(lift[q])))
            if img:
                table[(p, q)] = img
    try:
        quotient = build_algebra(dims, table)
    except CarnotError as exc:
        raise QuotientNotCarnot(str(exc)) from exc
    return quotient, proj


# ---------------------------------------------------------------------------
# automorphisms


def apply_matrix(M, x: GradedVector) -> GradedVector:
    return GradedVector(tuple(linalg.matvec(M, x.coords)))


def verify_graded_automorphism(a: CarnotAlgebra, M) -> tuple[bool, str | None]:
    """Check that M is an invertible, layer-preserving Lie algebra automorphism.

    Returns ``(ok, witness)`` where ``witness`` describes the first violation.
    """
    M = [[as_fraction(c) for c in row] for row in M]
    if len(M) != a.dim or any(len(row) != a.dim for row in M):
        return False, f"matrix is not {a.dim}x{a.dim}"
    for j in range(a.dim):
        for i in range(a.dim):
            if M[i][j] and a.layer_of[i] != a.layer_of[j]:
                return False, f"b{j + 1} is mapped outside layer {a.layer_of[j]}"
    if linalg.rank(M) != a.dim:
        return False, "matrix is singular"
    images = [apply_matrix(M, a.basis_vector(i)) for i in range(a.dim)]
    for i in range(a.dim):
        for j in range(i + 1, a.dim):
            lhs = apply_matrix(M, bracket(a, a.basis_vector(i), a.basis_vector(j)))
            rhs = bracket(a, images[i], images[j])
            if lhs != rhs:
                return False, f"M[b{i + 1}, b{j + 1}] != [M b{i + 1}, M b{j + 1}]"
    return True, None


# ---------------------------------------------------------------------------
# file format


def _fmt(c: Fraction) -> str:
    return str(c)


def algebra_to_dict(a: CarnotAlgebra) -> dict:
    brackets = []
    for (i, j) in sorted(a._structure):
        out = a._structure[(i, j)]
        brackets.append({"i": i + 1, "j": j + 1, "out": {str(k + 1): _fmt(c) for k, c in sorted(out.items())}})
    data = {"layers": list(a.layer_dims), "brackets": brackets}
    if a.name:
        data["name"] = a.name
    return data


def algebra_from_dict(data: Mapping) -> CarnotAlgebra:
    try:
        layers = [int(d) for d in data["layers"]]
        table = []
        for entry in data.get("brackets", []):
            out = {int(k) - 1: as_fraction(str(v)) for k, v in entry["out"].items()}
            table.append(((int(entry["i"]) - 1, int(entry["j"]) - 1), out))
    except (KeyError, TypeError, ValueError) as exc:
        raise CarnotError(f"malformed algebra description: {exc}") from exc
    return build_algebra(layers, table, name=data.get("name"))


def load_algebra(path) -> CarnotAlgebra:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CarnotError(f"{path}: invalid JSON ({exc})") from exc
    return algebra_from_dict(data)


def save_algebra(a: CarnotAlgebra, path) -> None:
    Path(path).write_text(json.dumps(algebra_to_dict(a), indent=2) + "\n")


def vectors_span_rank(vectors: Iterable[GradedVector]) -> int:
    return linalg.rank([v.coords for v in vectors])


def change_basis(a: CarnotAlgebra, P, name: str | None = None) -> CarnotAlgebra:
    """Same algebra written in the basis given by the columns of P.

    P must be invertible and layer-preserving (block diagonal by layer).
    """
    P = [[as_fraction(c) for c in row] for row in P]
    ok = len(P) == a.dim and all(
        not P[i][j] or a.layer_of[i] == a.layer_of[j] for i in range(a.dim) for j in range(a.dim)
    )
    if not ok:
        raise CarnotError("change of basis must be square and layer-preserving")
    Pinv = linalg.inverse(P)
    cols = [GradedVector(tuple(P[i][j] for i in range(a.dim))) for j in range(a.dim)]
    table = {}
    for i in range(a.dim):
        for j in range(i + 1, a.dim):
            br = bracket(a, cols[i], cols[j])
            if br:
                out = linalg.matvec(Pinv, br.coords)
                table[(i, j)] = {k: c for k, c in enumerate(out) if c}
    return build_algebra(a.layer_dims, table, name=name or a.name)
