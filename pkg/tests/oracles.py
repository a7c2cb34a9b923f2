"""Reference computations that share no code with the package.

Each oracle recomputes a quantity by a different route: textbook Gauss-Jordan
elimination instead of fraction-free elimination, the explicit double-sum BCH
series instead of the Dynkin projection of log(e^X e^Y), Bernoulli numbers
from their recurrence instead of a model-algebra evaluation.
"""
from __future__ import annotations

import random
from fractions import Fraction
from math import comb, factorial


def gauss_rank(rows) -> int:
    m = [[Fraction(c) for c in r] for r in rows]
    if not m:
        return 0
    rank, ncols = 0, len(m[0])
    for col in range(ncols):
        piv = next((r for r in range(rank, len(m)) if m[r][col] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        p = m[rank][col]
        m[rank] = [v / p for v in m[rank]]
        for r in range(len(m)):
            if r != rank and m[r][col] != 0:
                f = m[r][col]
                m[r] = [a - f * b for a, b in zip(m[r], m[rank])]
        rank += 1
    return rank


def structure_bracket(table, dim, x, y):
    """[x, y] straight from a {(i, j): {k: c}} table with i < j."""
    out = [Fraction(0)] * dim
    for (i, j), vec in table.items():
        coef = x[i] * y[j] - x[j] * y[i]
        if coef:
            for k, c in vec.items():
                out[k] += coef * c
    return out


def ad_rank(algebra, x) -> int:
    dim = algebra.dim
    table = algebra.structure
    cols = []
    for j in range(dim):
        e = [Fraction(0)] * dim
        e[j] = Fraction(1)
        cols.append(structure_bracket(table, dim, list(x), e))
    return gauss_rank(cols)


def _compositions(total_max):
    """Sequences of (r_i, s_i) with r_i + s_i >= 1 and total degree <= total_max."""
    def grow(prefix, budget):
        if prefix:
            yield tuple(prefix)
        for r in range(budget + 1):
            for s in range(budget + 1 - r):
                if r + s:
                    yield from grow(prefix + [(r, s)], budget - r - s)

    yield from grow([], total_max)


def double_sum_bch(algebra, x, y):
    """x*y from the explicit Dynkin double-sum series.

    sum_n (-1)^(n-1)/n sum_{r,s} [X^r1 Y^s1 ... X^rn Y^sn] / (sum(r+s) prod r_i! s_i!)
    with [a1 a2 ... ak] = [a1, [a2, [..., ak]]].
    """
    dim = algebra.dim
    table = algebra.structure
    x, y = list(x), list(y)
    out = [Fraction(0)] * dim
    for seq in _compositions(algebra.step):
        n = len(seq)
        letters = []
        for r, s in seq:
            letters += [x] * r + [y] * s
        val = letters[-1]
        for v in reversed(letters[:-1]):
            val = structure_bracket(table, dim, v, val)
        if not any(val):
            continue
        deg = sum(r + s for r, s in seq)
        denom = deg
        for r, s in seq:
            denom *= factorial(r) * factorial(s)
        coef = Fraction((-1) ** (n - 1), n) / denom
        out = [o + coef * v for o, v in zip(out, val)]
    return out


def bernoulli_plus(n: int) -> Fraction:
    """B_n with the B_1 = +1/2 convention, from sum_k C(m+1, k) B_k = 0."""
    b = [Fraction(1)]
    for m in range(1, n + 1):
        b.append(-sum(comb(m + 1, k) * b[k] for k in range(m)) / (m + 1))
    return -b[1] if n == 1 else b[n]


def random_rational(rng: random.Random, span: int = 9, den: int = 6) -> Fraction:
    return Fraction(rng.randint(-span, span), rng.randint(1, den))


def random_vector(rng: random.Random, dim: int, span: int = 9, den: int = 6):
    return tuple(random_rational(rng, span, den) for _ in range(dim))
