import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carnot_lab.algebra import direct_sum, element_rank
from carnot_lab.catalog import complex_heisenberg, euclidean, example_section4, filiform, heisenberg
from carnot_lab.exceptions import CarnotError, NotFiliform, PreconditionViolation, RankNotOne
from carnot_lab.maps import (
    DilationMap,
    FhMap,
    IdentityMap,
    PiecewisePolynomial,
    antiderivative_chain,
    apply_F_h,
    apply_G_h,
    distortion_estimate,
    ottazzi_basis,
    verify_translation_identity,
)
from carnot_lab.metric import HomogeneousMetric

from conftest import ALL, FIXTURES, small_fractions, vec, vectors

P = PiecewisePolynomial
TENT = P(["-2", "-1", "0", "1", "2"], [["0"], ["1", "1"], ["1", "-1"], ["0"]])
PROFILES = {"zero": P.polynomial([0]), "one": P.polynomial([1]), "x": P.polynomial([0, 1]), "tent": TENT}
RANK_ONE = ["H1", "H2", "F3", "F4", "F5", "H1+H1", "example4", "F3+R2", "R1+H1"]


def first_rank_one(a):
    return next(a.basis_vector(i) for i in range(a.layer_dims[0]) if element_rank(a, a.basis_vector(i)) == 1)


def _coeffs(p):
    return [[str(c) for c in s] for s in p.segments]


# ---------------------------------------------------------------- profiles


def test_chain_of_x():
    chain = antiderivative_chain(P.polynomial([0, 1]), 3)
    assert [_coeffs(h) for h in chain] == [[["0", "1"]], [["0", "0", "-1/2"]], [["0", "0", "0", "1/6"]]]


def test_chain_of_constants():
    assert all(h(5) == 0 for h in antiderivative_chain(P.polynomial([0]), 4))
    chain = antiderivative_chain(P.polynomial([1]), 3)
    assert [_coeffs(h) for h in chain] == [[["1"]], [["0", "-1"]], [["0", "0", "1/2"]]]


def test_tent_values_and_continuity():
    assert [TENT(x) for x in (-3, -2, -1, Fraction(-1, 2), 0, 1, 2, 5)] == [0, 0, 0, Fraction(1, 2), 1, 0, 0, 0]
    chain = antiderivative_chain(TENT, 4)
    for h in chain:
        assert h(0) == 0 or h is TENT
    # -h3' = h2 away from breakpoints
    h3 = chain[1]
    eps = Fraction(1, 10**6)
    for x in (Fraction(-3, 2), Fraction(1, 3), Fraction(7, 4)):
        assert -(h3(x + eps) - h3(x - eps)) / (2 * eps) == pytest.approx(float(TENT(x)), abs=1e-9)


def test_profile_rejects_discontinuity():
    with pytest.raises(CarnotError):
        P(["0", "1", "2"], [["0"], ["1"]])
    with pytest.raises(CarnotError):
        P(["0", "1"], [["0"], ["1"]])


def test_profile_json_roundtrip(tmp_path):
    path = tmp_path / "h.json"
    path.write_text(json.dumps(TENT.to_dict()))
    assert P.load(path) == TENT
    assert P.load(FIXTURES / "tent.json") == TENT


def test_profile_float_matches_exact():
    xs = np.linspace(-3, 3, 61)
    chain = antiderivative_chain(TENT, 3)
    for h in chain:
        assert np.allclose(h.evaluate_float(xs), [float(h(Fraction(x).limit_denominator(100))) for x in xs])


# ---------------------------------------------------------------- normal basis


def test_basis_filiform():
    f = filiform(4)
    b = ottazzi_basis(f, f.basis_vector(1))
    assert b.e[0] == f.basis_vector(0)
    assert b.e == [f.basis_vector(i) for i in range(5)]
    assert b.n == 4 and b.s == 0 and b.K_basis == []


def test_basis_heisenberg():
    h = heisenberg(1)
    b = ottazzi_basis(h, h.basis_vector(1))
    assert b.e == [h.basis_vector(0), h.basis_vector(1), h.basis_vector(2)]
    assert b.n == 2 and b.s == 0


def test_basis_with_euclidean_factor():
    a = direct_sum(filiform(3), euclidean(1))
    b = ottazzi_basis(a, a.basis_vector(1))
    assert b.n == 3 and b.s == 1


def test_basis_rejects_rank_two():
    c = complex_heisenberg(1)
    with pytest.raises(RankNotOne):
        ottazzi_basis(c, c.basis_vector(0))


# ---------------------------------------------------------------- maps


def test_F_h_examples():
    h = heisenberg(1)
    b = ottazzi_basis(h, h.basis_vector(1))
    one = antiderivative_chain(P.polynomial([1]), b.n)
    t = Fraction(7, 3)
    assert apply_F_h(h, b, one, vec(t, 0, 0)) == vec(t, 1, -t / 2)
    assert apply_F_h(h, b, one, h.zero()) == vec(0, 1, 0)
    zero = antiderivative_chain(P.polynomial([0]), b.n)
    assert apply_F_h(h, b, zero, vec(1, 2, 3)) == vec(1, 2, 3)


def test_G_h_examples():
    f = filiform(3)
    chain = antiderivative_chain(P.polynomial([0, 1]), 3)
    got = apply_G_h(f, chain, f.basis_vector(0))
    b = ottazzi_basis(f, f.basis_vector(1))
    assert got == apply_F_h(f, b, chain, f.basis_vector(0))
    p = vec(0, 2, -1, 5)
    assert apply_G_h(f, chain, p) == p
    with pytest.raises(NotFiliform):
        apply_G_h(heisenberg(2), antiderivative_chain(P.polynomial([1]), 2), vec(1, 0, 0, 0, 0))


def test_chain_length_checked():
    f = filiform(3)
    b = ottazzi_basis(f, f.basis_vector(1))
    with pytest.raises(PreconditionViolation):
        apply_F_h(f, b, antiderivative_chain(TENT, 2), f.zero())


def test_translation_identity_examples():
    f = filiform(3)
    b = ottazzi_basis(f, f.basis_vector(1))
    chain = antiderivative_chain(P.polynomial([0, 1]), b.n)
    assert verify_translation_identity(f, b, chain, f.zero(), f.basis_vector(0))
    x = vec(1, 2, 3, 4)
    assert verify_translation_identity(f, b, chain, x, x)


@settings(max_examples=80, deadline=None)
@given(st.sampled_from(RANK_ONE), st.sampled_from(sorted(PROFILES)), st.data())
def test_translation_identity_property(name, profile, data):
    a = ALL[name]
    b = ottazzi_basis(a, first_rank_one(a))
    chain = antiderivative_chain(PROFILES[profile], b.n)
    x, y = data.draw(vectors(a.dim)), data.draw(vectors(a.dim))
    assert verify_translation_identity(a, b, chain, x, y)


@settings(max_examples=80, deadline=None)
@given(st.sampled_from(RANK_ONE), st.sampled_from(sorted(PROFILES)), st.data())
def test_inverse_map_and_first_coordinate(name, profile, data):
    a = ALL[name]
    b = ottazzi_basis(a, first_rank_one(a))
    h = PROFILES[profile]
    fwd, back = antiderivative_chain(h, b.n), antiderivative_chain(-h, b.n)
    x = data.draw(vectors(a.dim))
    y = apply_F_h(a, b, fwd, x)
    assert apply_F_h(a, b, back, y) == x
    assert b.x1(y) == b.x1(x)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(RANK_ONE), st.data())
def test_fh_batch_matches_exact(name, data):
    a = ALL[name]
    b = ottazzi_basis(a, first_rank_one(a))
    fmap = FhMap(b, TENT)
    xs = [data.draw(vectors(a.dim)) for _ in range(4)]
    exact = np.array([fmap(x).as_float() for x in xs])
    assert np.allclose(fmap.batch(np.array([x.as_float() for x in xs])), exact, rtol=1e-12, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(small_fractions, st.integers(min_value=1, max_value=4))
def test_chain_starts_at_zero(c, n):
    chain = antiderivative_chain(P.polynomial([c, 1]), n)
    assert all(h(0) == 0 for h in chain[1:])


# ---------------------------------------------------------------- distortion


def test_identity_and_zero_profile():
    f = filiform(3)
    m = HomogeneousMetric(f)
    for fmap in (IdentityMap(), FhMap(ottazzi_basis(f, f.basis_vector(1)), P.polynomial([0]))):
        r = distortion_estimate(m, fmap, 300, seed=1)
        assert r["min_ratio"] == pytest.approx(1, abs=1e-12) and r["max_ratio"] == pytest.approx(1, abs=1e-12)


def test_dilation_ratio():
    a = example_section4()
    r = distortion_estimate(HomogeneousMetric(a), DilationMap(a, 2), 300, seed=2)
    assert abs(r["min_ratio"] - 2) <= 1e-9 and abs(r["max_ratio"] - 2) <= 1e-9


def test_tent_distortion_is_bounded():
    f = filiform(3)
    r = distortion_estimate(HomogeneousMetric(f), FhMap(ottazzi_basis(f, f.basis_vector(1)), TENT), 2000, seed=0)
    assert 0 < r["min_ratio"] <= 1 <= r["max_ratio"] < 10
    assert [s["scale"] for s in r["per_scale"]] == [0.25, 1.0, 4.0]


def test_distortion_deterministic():
    f = filiform(3)
    fmap = FhMap(ottazzi_basis(f, f.basis_vector(1)), TENT)
    m = HomogeneousMetric(f)
    assert distortion_estimate(m, fmap, 200, seed=5) == distortion_estimate(m, fmap, 200, seed=5)


def test_first_coordinate_functional():
    a = example_section4()
    b = ottazzi_basis(a, a.basis_vector(0))
    assert b.x1(b.e[0]) == 1
    assert all(b.x1(v) == 0 for v in b.basis()[1:])
