import random
from fractions import Fraction

import pytest

from carnot_lab import linalg
from carnot_lab.algebra import (
    ComplexGradedVector,
    GradedVector,
    change_basis,
    dilation_matrix,
    direct_sum,
    element_rank,
    element_rank_complex,
)
from carnot_lab.catalog import complex_heisenberg, euclidean, example_section4, filiform, heisenberg, heisenberg_power
from carnot_lab.exceptions import EmptyWitnessSet, NotAnAutomorphism, RankNotOne, SearchInconclusive, WitnessNotRankOne
from carnot_lab.rank import (
    equivalence_classes,
    extended_class,
    first_layer_kernel,
    harvest_witnesses,
    invariance_check,
    invariant_subspaces,
    min_rank_search,
    rank_one_image,
)

from conftest import vec
from oracles import ad_rank


def _rank_of(a, w):
    return element_rank_complex(a, w) if isinstance(w, ComplexGradedVector) else element_rank(a, w)


def test_section4_real_rank():
    a = example_section4()
    r = min_rank_search(a, "real", seed=0)
    assert (r.min_rank, r.status) == (1, "exact")
    assert r.witness.coords[2:] == (0, 0, 0) and not r.witness.is_zero()
    assert ad_rank(a, r.witness.coords) == 1


def test_complex_heisenberg_ranks():
    c = complex_heisenberg(1)
    real = min_rank_search(c, "real", seed=0)
    assert (real.min_rank, real.status) == (2, "exact")
    cx = min_rank_search(c, "complex", seed=0)
    assert (cx.min_rank, cx.status) == (1, "exact")
    assert element_rank_complex(c, cx.witness) == 1
    assert not cx.witness.is_real()


def test_euclidean_factor_gives_rank_zero():
    a = direct_sum(euclidean(2), heisenberg(1))
    r = min_rank_search(a, "real")
    assert (r.min_rank, r.status) == (0, "exact")
    assert element_rank(a, r.witness) == 0 and not r.witness.is_zero()
    assert len(first_layer_kernel(a)) == 2


@pytest.mark.parametrize("algebra, expected", [(heisenberg(2), 1), (filiform(3), 1), (filiform(4), 1), (euclidean(3), 0)])
def test_known_minimum_ranks(algebra, expected):
    r = min_rank_search(algebra, "real", restarts=16)
    assert (r.min_rank, r.status) == (expected, "exact")
    assert _rank_of(algebra, r.witness) == expected


def test_scrambled_basis_needs_search():
    # no basis vector has rank one after this change of basis
    a = example_section4()
    P = [[1, 1, 1, 0, 0], [1, -1, 2, 0, 0], [2, 1, -1, 0, 0], [0, 0, 0, 1, 1], [0, 0, 0, 1, -1]]
    b = change_basis(a, [[Fraction(c) for c in row] for row in P])
    assert all(element_rank(b, b.basis_vector(i)) == 2 for i in range(3))
    r = min_rank_search(b, "real", seed=3)
    assert (r.min_rank, r.status) == (1, "exact")
    assert element_rank(b, r.witness) == 1


def test_report_dict_shape():
    d = min_rank_search(heisenberg(1), "complex").to_dict()
    assert set(d) == {"field", "min_rank", "status", "witness", "residual"}
    assert d["field"] == "complex" and d["min_rank"] == 1


def test_search_inconclusive_below_cap():
    with pytest.raises(SearchInconclusive):
        min_rank_search(complex_heisenberg(1), "real", restarts=8, max_rank=1)


def test_thread_count_does_not_change_result(monkeypatch):
    b = example_section4()
    P = [[1, 1, 1, 0, 0], [1, -1, 2, 0, 0], [2, 1, -1, 0, 0], [0, 0, 0, 1, 1], [0, 0, 0, 1, -1]]
    b = change_basis(b, [[Fraction(c) for c in row] for row in P])
    monkeypatch.setenv("CARNOT_LAB_THREADS", "1")
    one = min_rank_search(b, "real", seed=5).to_dict()
    monkeypatch.setenv("CARNOT_LAB_THREADS", "8")
    eight = min_rank_search(b, "real", seed=5).to_dict()
    assert one == eight


# ---------------------------------------------------------------- rank-one images and classes


def test_rank_one_images():
    a = example_section4()
    x = vec(2, 3, 0, 0, 0)
    assert rank_one_image(a, x) == vec(0, 0, 0, 1, Fraction(3, 2))
    h = heisenberg(1)
    assert rank_one_image(h, h.basis_vector(0)) == h.basis_vector(2)
    f = filiform(3)
    assert rank_one_image(f, f.basis_vector(1)) == f.basis_vector(2)
    with pytest.raises(RankNotOne):
        rank_one_image(a, a.basis_vector(2))


def test_section4_classes_are_lines():
    a = example_section4()
    X1, X2 = a.basis_vector(0), a.basis_vector(1)
    dec = equivalence_classes(a, [X1, X2, X1 + X2])
    assert len(dec.classes) == 3
    assert all(len(basis) == 1 for basis, _ in dec.classes)
    # the expanded class of a rank-one element is just its line
    assert len(extended_class(a, X1)) == 1


def test_two_heisenberg_classes():
    a = heisenberg_power(1, 2)
    ws = [a.basis_vector(i) for i in range(4)]
    dec = equivalence_classes(a, ws)
    assert len(dec.classes) == 2
    spans = sorted(sorted(v.coords.index(1) for v in basis) for basis, _ in dec.classes)
    assert spans == [[0, 1], [2, 3]]
    assert dec.residual == []


def test_single_witness_single_class():
    h = heisenberg(1)
    assert len(equivalence_classes(h, [h.basis_vector(0)]).classes) == 1


def test_non_rank_one_witness_rejected():
    a = example_section4()
    with pytest.raises(WitnessNotRankOne):
        equivalence_classes(a, [a.basis_vector(2)])


# ---------------------------------------------------------------- invariant subspaces


def test_w1_of_section4():
    a = example_section4()
    report = min_rank_search(a, "real")
    w1 = invariant_subspaces(a, report, [a.basis_vector(0), a.basis_vector(1)])
    assert w1.kind == "W1" and len(w1.basis) == 2
    assert linalg.rank([v.coords for v in w1.basis] + [a.basis_vector(2).coords]) == 3
    assert invariance_check(a, w1, [dilation_matrix(a, 2)])
    std = [[Fraction(int(i == j)) for j in range(5)] for i in range(5)]
    assert invariance_check(a, [a.basis_vector(i) for i in range(3)], [std])


def test_filiform_w1_contains_e2():
    f = filiform(3)
    report = min_rank_search(f, "real")
    w1 = invariant_subspaces(f, report, harvest_witnesses(f, report))
    assert linalg.in_span([v.coords for v in w1.basis], f.basis_vector(1).coords)


def test_hat_w1_of_complex_heisenberg():
    c = complex_heisenberg(1)
    report = min_rank_search(c, "complex")
    w = report.witness
    wc, hat = invariant_subspaces(c, report, [w, w.conjugate()], expand=True)
    assert wc.kind == "W1C" and hat.kind == "hatW1"
    assert len(hat.basis) == 4


def test_invariance_against_swap():
    a = heisenberg_power(1, 2)
    P = [[0, 0, 1, 0, 0, 0], [0, 0, 0, 1, 0, 0], [1, 0, 0, 0, 0, 0],
         [0, 1, 0, 0, 0, 0], [0, 0, 0, 0, 0, 1], [0, 0, 0, 0, 1, 0]]
    P = [[Fraction(c) for c in r] for r in P]
    assert not invariance_check(a, [a.basis_vector(0)], [P])
    assert invariance_check(a, [a.basis_vector(i) for i in range(4)], [P])


def test_invariance_rejects_non_automorphism():
    h = heisenberg(1)
    bad = [[Fraction(c) for c in r] for r in [[0, 1, 0], [1, 0, 0], [0, 0, 1]]]
    with pytest.raises(NotAnAutomorphism):
        invariance_check(h, [h.basis_vector(0)], [bad])


def test_empty_witnesses():
    h = heisenberg(1)
    with pytest.raises(EmptyWitnessSet):
        invariant_subspaces(h, min_rank_search(h, "real"), [])


def test_harvest_covers_first_layer():
    a = heisenberg_power(1, 2)
    report = min_rank_search(a, "real")
    ws = harvest_witnesses(a, report)
    assert all(element_rank(a, w) == 1 for w in ws)
    vecs = [v for w in ws for v in extended_class(a, w)]
    assert linalg.rank([v.coords for v in vecs]) == 4


def test_random_rank_one_elements_of_section4():
    a = example_section4()
    rng = random.Random(7)
    for _ in range(30):
        x = GradedVector((Fraction(rng.randint(-5, 5)), Fraction(rng.randint(-5, 5)), Fraction(rng.randint(-5, 5)), 0, 0))
        expected = 2 if x.coords[2] else (1 if any(x.coords) else 0)
        assert element_rank(a, x) == expected
