import warnings
from fractions import Fraction
from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carnot_lab.algebra import GradedVector, apply_matrix, bracket, dilate, direct_sum
from carnot_lab.bch import (
    BCHEngine,
    bch_product,
    bch_word_coefficients,
    check_lemma_ad_identity,
    derive_c_constants,
    group_inverse,
    special_product,
)
from carnot_lab.catalog import euclidean, filiform, heisenberg, heisenberg_power
from carnot_lab.exceptions import PreconditionViolation, StepLimitExceeded

from conftest import ALL, vec, vectors
from oracles import bernoulli_plus, double_sum_bch, random_vector


def test_heisenberg_product():
    h = heisenberg(1)
    e = BCHEngine(h)
    assert e.product(vec(1, 0, 0), vec(0, 1, 0)) == vec(1, 1, Fraction(1, 2))


def test_filiform_product():
    f = filiform(3)
    e = BCHEngine(f)
    assert e.product(f.basis_vector(0), f.basis_vector(1)) == vec(1, 1, Fraction(1, 2), Fraction(1, 12))


def test_inverse_examples():
    h = heisenberg(1)
    e = BCHEngine(h)
    x = vec(1, 0, 1)
    assert group_inverse(x) == vec(-1, 0, -1)
    assert e.product(x, group_inverse(x)).is_zero()
    assert group_inverse(h.zero()).is_zero()


def test_low_degree_words():
    table = dict(bch_word_coefficients(3))
    assert table[(0,)] == 1 and table[(1,)] == 1
    # XY and YX bracket to [X,Y] and -[X,Y]
    assert table[(0, 1)] - table[(1, 0)] == Fraction(1, 2)


@pytest.mark.parametrize("name", ["F4", "H1C", "H2", "example4", "F3+R2"])
def test_product_matches_double_sum(name, rng):
    a = ALL[name]
    e = BCHEngine(a)
    for _ in range(15):
        x, y = random_vector(rng, a.dim), random_vector(rng, a.dim)
        assert list(e.product(GradedVector(x), GradedVector(y)).coords) == double_sum_bch(a, x, y)


def test_float_path_matches_exact(rng, any_algebra):
    e = BCHEngine(any_algebra)
    xs = [GradedVector(random_vector(rng, any_algebra.dim)) for _ in range(8)]
    ys = [GradedVector(random_vector(rng, any_algebra.dim)) for _ in range(8)]
    exact = np.array([e.product(x, y).as_float() for x, y in zip(xs, ys)])
    fast = e.product_float(np.array([x.as_float() for x in xs]), np.array([y.as_float() for y in ys]))
    assert np.allclose(fast, exact, rtol=1e-12, atol=1e-12)


def test_c_constants_match_bernoulli():
    cs = derive_c_constants(6)
    assert cs[0] == Fraction(1, 2)
    assert cs == tuple(bernoulli_plus(j) / factorial(j) for j in range(1, 6))
    assert cs[1] == Fraction(1, 12) and cs[2] == 0


def test_special_product_examples():
    f = filiform(3)
    e = BCHEngine(f)
    e1, e2 = f.basis_vector(0), f.basis_vector(1)
    assert special_product(e, e1, e2) == bch_product(e, e1, e2) == vec(1, 1, Fraction(1, 2), Fraction(1, 12))
    assert special_product(e, e1, f.zero()) == e1
    h = heisenberg(1)
    assert special_product(BCHEngine(h), vec(1, 0, 0), vec(0, 1, 0), cross_check=True) == vec(1, 1, Fraction(1, 2))


def test_special_product_precondition():
    f = filiform(3)
    with pytest.raises(PreconditionViolation):
        special_product(BCHEngine(f), f.basis_vector(1), f.basis_vector(0))


def test_ad_identity_examples():
    f = filiform(3)
    e = [f.basis_vector(i) for i in range(4)]
    assert check_lemma_ad_identity(f, [e[1]], e[1] + e[0] + e[2], e[1], 2)
    assert check_lemma_ad_identity(f, [e[1]], e[0], f.zero(), 3)
    a = direct_sum(heisenberg(1), euclidean(1))
    w = a.basis_vector(2)
    assert check_lemma_ad_identity(a, [w], vec(1, 2, 3, 4), w, 3)


def test_ad_identity_precondition():
    f = filiform(3)
    with pytest.raises(PreconditionViolation):
        check_lemma_ad_identity(f, [f.basis_vector(0)], f.basis_vector(1), f.basis_vector(0), 2)


def test_step_cap():
    with pytest.raises(StepLimitExceeded):
        BCHEngine(filiform(5), step_cap=4)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        BCHEngine(filiform(7))
    assert any(issubclass(w.category, RuntimeWarning) for w in caught)


# ---------------------------------------------------------------- properties

GROUPS = ["H1", "H2", "H1C", "F3", "F4", "H1+H1", "example4", "F3+R2"]


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(GROUPS), st.data())
def test_group_axioms(name, data):
    a = ALL[name]
    e = BCHEngine(a)
    x, y, z = (data.draw(vectors(a.dim)) for _ in range(3))
    assert e.product(e.product(x, y), z) == e.product(x, e.product(y, z))
    assert e.product(x, a.zero()) == x == e.product(a.zero(), x)
    assert e.product(x, -x).is_zero()


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(GROUPS), st.data(), st.fractions(min_value=-4, max_value=4, max_denominator=4).filter(bool))
def test_dilations_are_group_automorphisms(name, data, t):
    a = ALL[name]
    e = BCHEngine(a)
    x, y = data.draw(vectors(a.dim)), data.draw(vectors(a.dim))
    assert dilate(a, t, e.product(x, y)) == e.product(dilate(a, t, x), dilate(a, t, y))


@settings(max_examples=30, deadline=None)
@given(st.data())
def test_swap_automorphism_commutes_with_product(data):
    a = heisenberg_power(1, 2)
    P = [[0, 0, 1, 0, 0, 0], [0, 0, 0, 1, 0, 0], [1, 0, 0, 0, 0, 0],
         [0, 1, 0, 0, 0, 0], [0, 0, 0, 0, 0, 1], [0, 0, 0, 0, 1, 0]]
    P = [[Fraction(c) for c in r] for r in P]
    e = BCHEngine(a)
    x, y = data.draw(vectors(6)), data.draw(vectors(6))
    assert apply_matrix(P, e.product(x, y)) == e.product(apply_matrix(P, x), apply_matrix(P, y))


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["F3", "F4", "F5", "H1"]), st.data())
def test_special_product_agrees(name, data):
    a = ALL[name]
    e = BCHEngine(a)
    x = data.draw(vectors(a.dim))
    coeffs = data.draw(vectors(a.dim))
    # y in span(e2, ..., e_{n+1}) commutes with every higher layer
    y = GradedVector((Fraction(0),) + coeffs.coords[1:])
    assert special_product(e, x, y) == e.product(x, y)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["H1", "H2", "H1C", "H1+H1", "example4"]), st.data())
def test_step_two_commutator(name, data):
    a = ALL[name]
    e = BCHEngine(a)
    x, y = data.draw(vectors(a.dim)), data.draw(vectors(a.dim))
    assert e.product(x, y) - e.product(y, x) == bracket(a, x, y)
