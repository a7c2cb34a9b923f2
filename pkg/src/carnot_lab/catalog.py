"""Named Carnot algebras used as fixtures and CLI examples.

Basis conventions (all layer-contiguous):

* ``heisenberg(m)``: X_1..X_m, Y_1..Y_m | Z with [X_s, Y_s] = Z.
* ``complex_heisenberg(m)``: X_1..X_m, X~_1..X~_m, Y_1..Y_m, Y~_1..Y~_m | Z1, Z~1,
  the realification of [e_s, e_{m+s}] = eta with X~ = iX, Y~ = iY, Z~1 = i eta.
* ``filiform(n)``: e_1, e_2 | e_3 | ... | e_{n+1} with [e_1, e_j] = e_{j+1}.
* ``example_section4()``: X1, X2, Y | Z1, Z2 with [X1, Y] = Z1, [X2, Y] = Z2.
* ``euclidean(k)``: a single abelian layer.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

from . import linalg
from .algebra import CarnotAlgebra, GradedVector, build_algebra, central_quotient, direct_sum
from .exceptions import CarnotError, ConditionFailure
from .linalg import ONE


def heisenberg(m: int) -> CarnotAlgebra:
    if m < 1:
        raise CarnotError("Heisenberg algebra needs m >= 1")
    z = 2 * m
    table = {(s, m + s): {z: ONE} for s in range(m)}
    return build_algebra([2 * m, 1], table, name=f"heisenberg({m})")


def complex_heisenberg(m: int) -> CarnotAlgebra:
    if m < 1:
        raise CarnotError("complex Heisenberg algebra needs m >= 1")
    X = lambda s: s  # noqa: E731
    Xt = lambda s: m + s  # noqa: E731
    Y = lambda s: 2 * m + s  # noqa: E731
    Yt = lambda s: 3 * m + s  # noqa: E731
    z1, z1t = 4 * m, 4 * m + 1
    table = {}
    for s in range(m):
        table[(X(s), Y(s))] = {z1: ONE}
        table[(X(s), Yt(s))] = {z1t: ONE}
        table[(Xt(s), Y(s))] = {z1t: ONE}
        table[(Xt(s), Yt(s))] = {z1: -ONE}
    return build_algebra([4 * m, 2], table, name=f"complex_heisenberg({m})")


def filiform(n: int) -> CarnotAlgebra:
    """Model filiform algebra of step n (dimension n + 1)."""
    if n < 2:
        raise CarnotError("model filiform algebra needs n >= 2")
    table = {(0, j): {j + 1: ONE} for j in range(1, n)}
    return build_algebra([2] + [1] * (n - 1), table, name=f"filiform({n})")


def example_section4() -> CarnotAlgebra:
    return build_algebra([3, 2], {(0, 2): {3: ONE}, (1, 2): {4: ONE}}, name="example_section4")


def euclidean(k: int) -> CarnotAlgebra:
    if k < 1:
        raise CarnotError("Euclidean algebra needs k >= 1")
    return build_algebra([k], {}, name=f"euclidean({k})")


def heisenberg_power(m: int, n: int) -> CarnotAlgebra:
    """Direct sum of n copies of heisenberg(m)."""
    a = heisenberg(m)
    for _ in range(n - 1):
        a = direct_sum(a, heisenberg(m))
    a.name = f"heisenberg({m})^{n}"
    return a


def complex_heisenberg_power(m: int, n: int) -> CarnotAlgebra:
    """Direct sum of n copies of complex_heisenberg(m)."""
    a = complex_heisenberg(m)
    for _ in range(n - 1):
        a = direct_sum(a, complex_heisenberg(m))
    a.name = f"complex_heisenberg({m})^{n}"
    return a


def check_product_conditions(n: int, block: int, V_rows: Sequence[Sequence]) -> dict:
    """Exact checks of conditions (1) and (2) for V inside V~2 = L~_1 ⊕ ... ⊕ L~_n.

    ``V_rows`` are coordinate vectors in V~2 (length ``n * block``); ``L~_j`` is
    spanned by coordinates ``j*block .. (j+1)*block - 1``.
    """
    V = [list(r) for r in V_rows]
    dimV = linalg.rank(V)

    def L(j):
        rows = []
        for t in range(block):
            e = [linalg.ZERO] * (n * block)
            e[j * block + t] = ONE
            rows.append(e)
        return rows

    cond1 = all(linalg.intersection_dim(L(j), V) == 0 for j in range(n))
    cond2 = True
    for i in range(n):
        for j in range(i + 1, n):
            if linalg.intersection_dim(V + L(i), V + L(j)) != dimV:
                cond2 = False
    return {"1": cond1, "2": cond2}


def heisenberg_product(m: int, n: int, V_basis: Sequence[Sequence] = ()) -> CarnotAlgebra:
    """Quotient of n copies of heisenberg(m) by V ⊂ V~2, given in V~2 coordinates."""
    V = [[linalg.as_fraction(c) for c in row] for row in V_basis]
    for row in V:
        if len(row) != n:
            raise CarnotError(f"V basis vectors must have length {n}")
    checks = check_product_conditions(n, 1, V)
    for cond in ("1", "2"):
        if not checks[cond]:
            raise ConditionFailure(cond)
    a = heisenberg_power(m, n)
    if not V:
        return a
    first = 2 * m * n
    vecs = [GradedVector(tuple([linalg.ZERO] * first + list(row))) for row in V]
    q, _ = central_quotient(a, vecs)
    q.name = f"heisenberg_product({m},{n})"
    return q


@dataclass
class CatalogEntry:
    name: str
    parameters: dict
    builder: Callable[[], CarnotAlgebra]
    # expected r1, r1C, verdict and case, each tagged with its provenance
    known_facts: dict = field(default_factory=dict)

    def build(self) -> CarnotAlgebra:
        return self.builder()


def _facts(r1, r1c, verdict, case, source):
    return {"r1": r1, "r1C": r1c, "verdict": verdict, "case": case, "source": source}


def entry(name: str, *params) -> CatalogEntry:
    """Catalog entry by family name and integer parameters."""
    p = [int(x) for x in params]
    if name == "heisenberg":
        (m,) = p or [1]
        return CatalogEntry(name, {"m": m}, lambda: heisenberg(m),
                            _facts(1, 1, "non_rigid", "heisenberg_product_candidate", "cited: Heisenberg product algebras have r1 = 1"))
    if name == "complex_heisenberg":
        (m,) = p or [1]
        return CatalogEntry(name, {"m": m}, lambda: complex_heisenberg(m),
                            _facts(2, 1, "non_rigid", "complex_heisenberg_product_candidate", "cited: complex Heisenberg algebras have r1 = 2, r1C = 1"))
    if name == "filiform":
        (n,) = p or [3]
        case = "heisenberg_product_candidate" if n == 2 else "reducible_first_layer"
        return CatalogEntry(name, {"n": n}, lambda: filiform(n),
                            _facts(1, 1, "non_rigid", case, "derived: rank(e2) = 1; non-rigid of step >= 3 forces a reducible first layer"))
    if name == "example_section4":
        return CatalogEntry(name, {}, example_section4,
                            _facts(1, 1, "non_rigid", "reducible_first_layer", "cited: rank-one elements are the nonzero elements of span(X1, X2)"))
    if name == "euclidean":
        (k,) = p or [1]
        return CatalogEntry(name, {"k": k}, lambda: euclidean(k),
                            _facts(0, 0, "non_rigid", "euclidean", "trivial: abelian"))
    if name == "heisenberg_product":
        m, n = (p + [1, 2][len(p):])[:2]
        return CatalogEntry(name, {"m": m, "n": n}, lambda: heisenberg_product(m, n),
                            _facts(1, 1, "non_rigid", "heisenberg_product_candidate", "cited: Heisenberg product algebras have r1 = 1"))
    raise CarnotError(f"unknown catalog family {name!r}; known: {', '.join(FAMILIES)}")


FAMILIES = {
    "heisenberg": "m",
    "complex_heisenberg": "m",
    "filiform": "n",
    "example_section4": "",
    "euclidean": "k",
    "heisenberg_product": "m n",
}


def default_entries() -> list[CatalogEntry]:
    """Representative parameter choices for every family."""
    return [
        entry("euclidean", 1),
        entry("euclidean", 3),
        entry("heisenberg", 1),
        entry("heisenberg", 2),
        entry("complex_heisenberg", 1),
        entry("filiform", 2),
        entry("filiform", 3),
        entry("filiform", 4),
        entry("example_section4"),
        entry("heisenberg_product", 1, 2),
    ]
