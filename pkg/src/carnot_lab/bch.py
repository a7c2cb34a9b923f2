"""Group law on a Carnot algebra via the truncated BCH series.

The production path computes log(exp X exp Y) in the free associative algebra
on two letters, truncated at the nilpotency step, and projects each word onto
its left-normed commutator with the Dynkin operator w -> [w]/|w|.  The result
is a table of rational coefficients per bracket word; it depends only on the
step, so it is cached.  Products are evaluated by walking the prefix tree of
that table, one bracket per node.
"""
from __future__ import annotations

import warnings
from fractions import Fraction
from functools import lru_cache
from math import factorial

import numpy as np

from .algebra import CarnotAlgebra, GradedVector, bracket
from .exceptions import InternalInconsistency, PreconditionViolation, StepLimitExceeded
from . import linalg

DEFAULT_STEP_CAP = 8
_COST_WARNING_STEP = 7

X, Y = 0, 1


def _series_mul(a: dict, b: dict, max_deg: int) -> dict:
    out: dict = {}
    for wa, ca in a.items():
        la = len(wa)
        for wb, cb in b.items():
            if la + len(wb) > max_deg:
                continue
            w = wa + wb
            out[w] = out.get(w, 0) + ca * cb
    return {w: c for w, c in out.items() if c}


@lru_cache(maxsize=None)
def bch_word_coefficients(step: int) -> tuple:
    """Coefficients of left-normed bracket words in log(e^X e^Y), degree <= step.

    Returns a tuple of ``(word, coefficient)`` pairs where ``word`` is a tuple
    of letters 0 (X) and 1 (Y), sorted by length then lexicographically.
    Words whose first two letters coincide are dropped (their bracket is 0).
    """
    n = max(step, 1)
    expxy = {}
    for p in range(n + 1):
        for q in range(n + 1 - p):
            if p + q == 0:
                continue
            expxy[(X,) * p + (Y,) * q] = Fraction(1, factorial(p) * factorial(q))
    # log(1 + Z) with Z = exp(X)exp(Y) - 1
    log = {}
    power = dict(expxy)
    for k in range(1, n + 1):
        coef = Fraction((-1) ** (k + 1), k)
        for w, c in power.items():
            log[w] = log.get(w, 0) + coef * c
        if k < n:
            power = _series_mul(power, expxy, n)
    table = []
    for w, c in log.items():
        if not c:
            continue
        if len(w) >= 2 and w[0] == w[1]:
            continue
        table.append((w, c / len(w)))
    table.sort(key=lambda t: (len(t[0]), t[0]))
    return tuple(table)


class _Node:
    __slots__ = ("children", "coef")

    def __init__(self):
        self.children = {}
        self.coef = Fraction(0)


@lru_cache(maxsize=None)
def _prefix_tree(step: int) -> _Node:
    root = _Node()
    for w, c in bch_word_coefficients(step):
        node = root
        for letter in w:
            node = node.children.setdefault(letter, _Node())
        node.coef += c
    return root


class BCHEngine:
    """Exact group law ``x * y = log(exp x exp y)`` on one algebra.

    Immutable after construction; the coefficient table is shared across
    engines of the same step.
    """

    def __init__(self, algebra: CarnotAlgebra, step_cap: int = DEFAULT_STEP_CAP):
        if algebra.step > step_cap:
            raise StepLimitExceeded(f"step {algebra.step} exceeds the configured cap {step_cap}")
        if algebra.step >= _COST_WARNING_STEP:
            warnings.warn(
                f"BCH evaluation at step {algebra.step} enumerates ~2^{algebra.step} bracket words per product",
                RuntimeWarning,
                stacklevel=2,
            )
        self.algebra = algebra
        self.step = algebra.step
        self.coefficient_table = bch_word_coefficients(self.step)
        self._tree = _prefix_tree(self.step)

    def product(self, x: GradedVector, y: GradedVector) -> GradedVector:
        a = self.algebra
        a.check(x)
        a.check(y)
        letters = (x, y)
        out = [Fraction(0)] * a.dim
        stack = [(child, letters[letter]) for letter, child in self._tree.children.items()]
        while stack:
            node, value = stack.pop()
            if value.is_zero():
                continue
            if node.coef:
                c = node.coef
                for i, v in enumerate(value.coords):
                    if v:
                        out[i] += c * v
            for letter, child in node.children.items():
                # left-normed: [prefix, letter]
                stack.append((child, bracket(a, value, letters[letter])))
        return GradedVector(tuple(out))

    def product_float(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Batched float64 product; rows of ``x`` and ``y`` are points."""
        C = self.algebra.structure_tensor
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        letters = (x, y)
        out = np.zeros(np.broadcast_shapes(x.shape, y.shape))
        stack = [(child, letters[letter]) for letter, child in self._tree.children.items()]
        while stack:
            node, value = stack.pop()
            if node.coef:
                out = out + float(node.coef) * value
            for letter, child in node.children.items():
                stack.append((child, np.einsum("bi,bj,ijk->bk", *np.broadcast_arrays(value, letters[letter]), C)))
        return out

    def inverse(self, x: GradedVector) -> GradedVector:
        return -x


def bch_product(e: BCHEngine, x: GradedVector, y: GradedVector) -> GradedVector:
    return e.product(x, y)


def group_inverse(x: GradedVector) -> GradedVector:
    return -x


@lru_cache(maxsize=None)
def derive_c_constants(max_step: int) -> tuple:
    """Universal constants c_1..c_{max_step-1} of the special-form product.

    Read off from e1 * e2 in the model filiform algebra of step ``max_step``,
    where (ad e1)^j e2 = e_{j+2} and e2 commutes with every higher layer.
    """
    from .catalog import filiform

    if max_step < 2:
        raise ValueError("max_step must be at least 2")
    f = filiform(max_step)
    e = BCHEngine(f, step_cap=max(max_step, DEFAULT_STEP_CAP))
    prod = e.product(f.basis_vector(0), f.basis_vector(1))
    cs = tuple(prod[j + 1] for j in range(1, max_step))
    if cs[0] != Fraction(1, 2):
        raise InternalInconsistency(f"c_1 = {cs[0]}, expected 1/2")
    return cs


def commutes_with_higher_layers(a: CarnotAlgebra, y: GradedVector):
    """First basis index b in layers >= 2 with [y, b] != 0, or None."""
    for i in range(a.offsets[1] if a.step > 1 else a.dim, a.dim):
        if not bracket(a, y, a.basis_vector(i)).is_zero():
            return i
    return None


def special_product(e: BCHEngine, x: GradedVector, y: GradedVector, cross_check: bool = False) -> GradedVector:
    """x * y = x + y + sum_j c_j (ad x)^j y, valid when [y, V_i] = 0 for i >= 2."""
    a = e.algebra
    a.check(x)
    a.check(y)
    bad = commutes_with_higher_layers(a, y)
    if bad is not None:
        raise PreconditionViolation(f"[y, b{bad + 1}] != 0 with b{bad + 1} in layer {a.layer_of[bad]}")
    out = x + y
    if a.step >= 2:
        cs = derive_c_constants(max(a.step, 2))
        term = y
        for j in range(1, a.step):
            term = bracket(a, x, term)
            if term.is_zero():
                break
            if cs[j - 1]:
                out = out + term * cs[j - 1]
    if cross_check:
        ref = e.product(x, y)
        if ref != out:
            raise InternalInconsistency("special-form product disagrees with the BCH series")
    return out


def _in_span(basis, v) -> bool:
    return linalg.in_span([b.coords for b in basis], v.coords)


def check_lemma_ad_identity(a: CarnotAlgebra, W_basis, x: GradedVector, u: GradedVector, max_i: int) -> bool:
    """Verify (ad x)^i u == (ad x~1)^i u for i = 1..max_i.

    W must be an abelian subspace of V1 commuting with every higher layer and
    u must lie in W.  x~1 is the first-layer part of x in the complement of W
    spanned by the lowest-index standard basis vectors of V1 not in W.
    """
    from .exceptions import PaperInvariantViolation

    W = list(W_basis)
    for w in W:
        a.check(w)
        if any(c for i, c in enumerate(w.coords) if a.layer_of[i] != 1):
            raise PreconditionViolation(f"{w} is not in the first layer")
        if commutes_with_higher_layers(a, w) is not None:
            raise PreconditionViolation(f"{w} does not commute with the higher layers")
    for i, w in enumerate(W):
        for v in W[i + 1:]:
            if not bracket(a, w, v).is_zero():
                raise PreconditionViolation("W is not abelian")
    a.check(x)
    a.check(u)
    if not u.is_zero() and not _in_span(W, u):
        raise PreconditionViolation("u is not in span(W)")
    v1 = list(a.layer_indices(1))
    w_rows = [[w.coords[i] for i in v1] for w in W]
    std = [[linalg.ONE if s == t else linalg.ZERO for t in range(len(v1))] for s in range(len(v1))]
    comp = linalg.complete_basis(w_rows, std)
    indep = [w_rows[k] for k in linalg.independent_subset(w_rows)] if w_rows else []
    full = indep + [std[c] for c in comp]
    coeffs = linalg.solve_in_span(full, [x.coords[i] for i in v1])
    tail = coeffs[len(indep):]
    xt1 = [linalg.ZERO] * a.dim
    for c, col in zip(tail, comp):
        xt1[v1[col]] = c
    xt1 = GradedVector(tuple(xt1))
    lhs, rhs = u, u
    for _ in range(max_i):
        lhs = bracket(a, x, lhs)
        rhs = bracket(a, xt1, rhs)
        if lhs != rhs:
            raise PaperInvariantViolation("(ad x)^i u != (ad x~1)^i u")
    return True
