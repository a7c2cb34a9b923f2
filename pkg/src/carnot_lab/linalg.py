"""Exact linear algebra over the rationals (and Gaussian rationals).

Matrices are lists of rows.  Entries are :class:`fractions.Fraction`; rank is
computed by fraction-free (Bareiss) elimination on integer rows, while kernels
and span membership go through a reduced row echelon form.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Iterable, Sequence

Q = Fraction
ZERO = Fraction(0)
ONE = Fraction(1)


def as_fraction(value) -> Fraction:
    """Coerce ints, Fractions and strings like ``"-3/4"`` to a Fraction.

    Floats are rejected: exact inputs only.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not scalars")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"expected an exact rational, got {type(value).__name__}")


def _integer_row(row: Sequence[Fraction]) -> list[int]:
    den = 1
    for x in row:
        if x:
            den = lcm(den, x.denominator)
    return [int(x * den) for x in row]


def rank(rows: Iterable[Sequence[Fraction]]) -> int:
    """Exact rank by Bareiss elimination."""
    m = [_integer_row(r) for r in rows]
    m = [r for r in m if any(r)]
    if not m:
        return 0
    ncols = len(m[0])
    nrows = len(m)
    r = 0
    prev = 1
    for c in range(ncols):
        if r == nrows:
            break
        p = next((i for i in range(r, nrows) if m[i][c]), None)
        if p is None:
            continue
        if p != r:
            m[p], m[r] = m[r], m[p]
        piv = m[r][c]
        row_r = m[r]
        for i in range(r + 1, nrows):
            row_i = m[i]
            f = row_i[c]
            for j in range(c + 1, ncols):
                row_i[j] = (row_i[j] * piv - f * row_r[j]) // prev
            row_i[c] = 0
        prev = piv
        r += 1
    return r


def rref(rows: Sequence[Sequence[Fraction]], ncols: int | None = None):
    """Reduced row echelon form. Returns ``(rows, pivot_columns)``."""
    m = [list(r) for r in rows]
    if ncols is None:
        ncols = len(m[0]) if m else 0
    pivots = []
    r = 0
    for c in range(ncols):
        p = next((i for i in range(r, len(m)) if m[i][c]), None)
        if p is None:
            continue
        m[p], m[r] = m[r], m[p]
        inv = 1 / m[r][c]
        m[r] = [x * inv for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c]:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def nullspace(rows: Sequence[Sequence[Fraction]], ncols: int) -> list[list[Fraction]]:
    """Basis of ``{v : M v = 0}``, one vector per free column (lowest first)."""
    red, pivots = rref(rows, ncols) if rows else ([], [])
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        v = [ZERO] * ncols
        v[f] = ONE
        for row, pc in zip(red, pivots):
            v[pc] = -row[f]
        basis.append(v)
    return basis


def row_space_basis(vectors: Sequence[Sequence[Fraction]], ncols: int | None = None):
    red, _ = rref(vectors, ncols)
    return red


def independent_subset(vectors: Sequence[Sequence[Fraction]]) -> list[int]:
    """Indices of a greedy maximal linearly independent subfamily."""
    chosen: list[int] = []
    current: list[Sequence[Fraction]] = []
    for idx, v in enumerate(vectors):
        if rank(current + [v]) > len(current):
            chosen.append(idx)
            current.append(v)
    return chosen


def in_span(basis: Sequence[Sequence[Fraction]], v: Sequence[Fraction]) -> bool:
    return rank(list(basis) + [v]) == rank(basis)


def solve_in_span(basis: Sequence[Sequence[Fraction]], v: Sequence[Fraction]):
    """Coefficients ``c`` with ``sum c_i basis_i == v``, or ``None``.

    ``basis`` must be linearly independent.
    """
    k = len(basis)
    n = len(v)
    # columns of the system are the basis vectors
    aug = [[basis[j][i] for j in range(k)] + [v[i]] for i in range(n)]
    red, pivots = rref(aug, k + 1)
    if k in pivots:
        return None
    coeffs = [ZERO] * k
    for row, pc in zip(red, pivots):
        coeffs[pc] = row[k]
    return coeffs


def complete_basis(vectors, candidates) -> list[int]:
    """Indices of candidates that greedily extend ``vectors`` to a larger independent set."""
    current = list(vectors)
    base = rank(current)
    chosen = []
    for idx, c in enumerate(candidates):
        if rank(current + [c]) > base:
            current.append(c)
            base += 1
            chosen.append(idx)
    return chosen


def matmul(a, b):
    bt = list(zip(*b))
    return [[sum((x * y for x, y in zip(row, col)), ZERO) for col in bt] for row in a]


def matvec(a, v):
    return [sum((x * y for x, y in zip(row, v)), ZERO) for row in a]


def identity(n: int):
    return [[ONE if i == j else ZERO for j in range(n)] for i in range(n)]


def inverse(a):
    n = len(a)
    aug = [list(row) + [ONE if i == j else ZERO for j in range(n)] for i, row in enumerate(a)]
    red, pivots = rref(aug, 2 * n)
    if pivots[:n] != list(range(n)) or len(red) < n:
        raise ZeroDivisionError("matrix is singular")
    return [row[n:] for row in red[:n]]


def intersection_dim(a, b) -> int:
    """dim(span a ∩ span b) via dim A + dim B - dim(A + B)."""
    return rank(a) + rank(b) - rank(list(a) + list(b))


@dataclass(frozen=True)
class GaussianRational:
    """Exact element of Q(i)."""

    re: Fraction = ZERO
    im: Fraction = ZERO

    @classmethod
    def of(cls, x) -> "GaussianRational":
        if isinstance(x, GaussianRational):
            return x
        return cls(as_fraction(x), ZERO)

    def __add__(self, o):
        o = GaussianRational.of(o)
        return GaussianRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __sub__(self, o):
        o = GaussianRational.of(o)
        return GaussianRational(self.re - o.re, self.im - o.im)

    def __rsub__(self, o):
        return GaussianRational.of(o) - self

    def __mul__(self, o):
        o = GaussianRational.of(o)
        return GaussianRational(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = GaussianRational.of(o)
        n = o.re * o.re + o.im * o.im
        if not n:
            raise ZeroDivisionError("division by zero in Q(i)")
        return self * GaussianRational(o.re / n, -o.im / n)

    def __rtruediv__(self, o):
        return GaussianRational.of(o) / self

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, o):
        if isinstance(o, (int, Fraction)):
            return self.re == o and not self.im
        if not isinstance(o, GaussianRational):
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def conjugate(self):
        return GaussianRational(self.re, -self.im)

    def abs2(self) -> Fraction:
        return self.re * self.re + self.im * self.im

    def __str__(self):
        if not self.im:
            return str(self.re)
        if not self.re:
            return f"{self.im}i"
        sign = "+" if self.im > 0 else "-"
        return f"{self.re}{sign}{abs(self.im)}i"


I = GaussianRational(ZERO, ONE)
