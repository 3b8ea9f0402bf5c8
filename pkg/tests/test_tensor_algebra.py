"""Truncated tensor algebra: indexing, exactness, series, norms, operators."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trunclog import tensor_algebra as ta

P22 = ta.AlgebraParams(2, 2)
P23 = ta.AlgebraParams(2, 3)
P34 = ta.AlgebraParams(3, 4)


def rand_algebra(params, seed):
    rng = np.random.default_rng(seed)
    levels = [rng.standard_normal(params.level_dim(k)) for k in range(params.kappa + 1)]
    levels[0][0] = 0.0
    return ta.AlgebraElement(params, levels)


def rand_group(params, seed):
    g = rand_algebra(params, seed)
    levels = [b.copy() for b in g.levels]
    levels[0][0] = 1.0
    return ta.GroupElement(params, levels)


# ---------------------------------------------------------------------------
# storage layout and product indexing
# ---------------------------------------------------------------------------

def test_product_lands_on_lexicographic_word_index():
    # (1 + e1)(1 + e2) = 1 + e1 + e2 + e1e2; word (0,1) sits at flat index 1
    e1, e2 = ta.basis_vector(P22, 0), ta.basis_vector(P22, 1)
    g = ta.mul(ta.add(ta.unit(P22), e1).as_group(), ta.add(ta.unit(P22), e2).as_group())
    assert g.levels[0].tolist() == [1.0]
    assert g.levels[1].tolist() == [1.0, 1.0]
    assert g.levels[2].tolist() == [0.0, 1.0, 0.0, 0.0]


def test_word_concatenation_indexing():
    # e_w (x) e_v = e_{wv} for every pair of words, d=3
    params = P34
    lvl1 = np.zeros(3)
    lvl1[2] = 1.0  # word (2,)
    A = ta.AlgebraElement(params, [np.zeros(1), lvl1] + [np.zeros(params.level_dim(k)) for k in (2, 3, 4)])
    lvl2 = np.zeros(9)
    lvl2[1 * 3 + 0] = 1.0  # word (1,0)
    B = ta.AlgebraElement(params, [np.zeros(1), np.zeros(3), lvl2, np.zeros(27), np.zeros(81)])
    C = ta.mul(A, B)
    idx = 2 * 9 + 1 * 3 + 0  # word (2,1,0)
    expect = np.zeros(27)
    expect[idx] = 1.0
    np.testing.assert_array_equal(C.levels[3], expect)


def test_mul_discards_degrees_beyond_cutoff():
    top = ta.AlgebraElement(
        P22, [np.zeros(1), np.zeros(2), np.ones(4)]
    )
    prod = ta.mul(top, top)
    assert ta.norm(prod) == 0.0


def test_mul_extended_keeps_all_degrees():
    e1, e2 = ta.basis_vector(P22, 0), ta.basis_vector(P22, 1)
    top = ta.mul(e1, e2)  # e1e2 at degree 2
    wide = ta.mul_extended(top, top)  # degree 4 word (0,1,0,1)
    assert wide.params == ta.AlgebraParams(2, 4)
    idx = 0 * 8 + 1 * 4 + 0 * 2 + 1
    expect = np.zeros(16)
    expect[idx] = 1.0
    np.testing.assert_array_equal(wide.levels[4], expect)
    # and it agrees with plain mul below the cutoff
    for k in range(3):
        np.testing.assert_allclose(wide.levels[k][: P22.level_dim(k)].sum(), ta.mul(top, top).levels[k].sum())


def test_mul_associative():
    A, B, C = (rand_algebra(P23, s) for s in (1, 2, 3))
    lhs = ta.mul(ta.mul(A, B), C)
    rhs = ta.mul(A, ta.mul(B, C))
    assert ta.norm(ta.sub(lhs, rhs)) < 1e-12 * max(1.0, ta.norm(lhs))


# ---------------------------------------------------------------------------
# exact degree-0 bookkeeping
# ---------------------------------------------------------------------------

def test_group_product_level0_is_exactly_one():
    g, h = rand_group(P23, 4), rand_group(P23, 5)
    prod = ta.mul(g, h)
    assert isinstance(prod, ta.GroupElement)
    assert prod.levels[0][0] == 1.0


def test_class_constructors_enforce_level0():
    levels = [np.full(P22.level_dim(k), 0.5) for k in range(3)]
    with pytest.raises(ValueError):
        ta.AlgebraElement(P22, levels)
    with pytest.raises(ValueError):
        ta.GroupElement(P22, levels)


def test_sub_of_equal_level0_is_exactly_nilpotent():
    g, h = rand_group(P23, 6), rand_group(P23, 7)
    diff = ta.sub(g, h)
    assert isinstance(diff, ta.AlgebraElement)
    assert diff.levels[0][0] == 0.0


def test_immutability():
    A = rand_algebra(P22, 8)
    with pytest.raises(AttributeError):
        A.params = P23
    with pytest.raises(ValueError):
        A.levels[1][0] = 5.0


# ---------------------------------------------------------------------------
# series coefficients (exact rational recurrences)
# ---------------------------------------------------------------------------

def test_exp_log_inverse_psi_coefficient_tables():
    assert ta.exp_coeffs(4) == [1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0]
    assert ta.log_coeffs(4) == [0.0, 1.0, -0.5, 1.0 / 3.0, -0.25]
    assert ta.inverse_coeffs(4) == [1.0, -1.0, 1.0, -1.0, 1.0]
    assert ta.psi_coeffs(3) == [1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0]


def test_psi_minus_matches_bernoulli_numbers():
    # Independent route: z/(1-e^{-z}) = sum B_k^+ z^k / k!, and the Bernoulli
    # numbers satisfy B_m = -(1/(m+1)) sum_{j<m} C(m+1,j) B_j (minus
    # convention, B_1 = -1/2); the plus convention flips the sign at k=1.
    n = 9
    bern = [Fraction(1)]
    for m in range(1, n):
        s = sum(Fraction(math.comb(m + 1, j)) * bern[j] for j in range(m))
        bern.append(-s / (m + 1))
    bplus = [(-b if m == 1 else b) for m, b in enumerate(bern)]
    expect = [float(b / math.factorial(k)) for k, b in enumerate(bplus)]
    got = ta.psi_minus_coeffs(n)
    assert got == expect
    # spot values: 1, 1/2, 1/12, 0, -1/720
    assert got[:5] == [1.0, 0.5, float(Fraction(1, 12)), 0.0, float(Fraction(-1, 720))]


def test_psi_minus_is_reciprocal_of_psi_of_minus_z():
    # functional check inside the algebra: psi_minus(ad) o psi(-ad) acts as
    # the identity once both series are applied to the same nilpotent element
    xi = rand_algebra(P23, 9)
    B = rand_algebra(P23, 10)
    psim = ta.psi_minus_coeffs(3)
    psi_neg = [c * (-1.0) ** k for k, c in enumerate(ta.psi_coeffs(3))]
    once = ta.ad_series_apply(psi_neg, xi, B)
    back = ta.ad_series_apply(psim, xi, once)
    assert ta.norm(ta.sub(back, B)) < 1e-13 * max(1.0, ta.norm(B))


# ---------------------------------------------------------------------------
# exp / log / inverse
# ---------------------------------------------------------------------------

def test_exp_log_roundtrip():
    A = rand_algebra(P34, 11)
    back = ta.log(ta.exp(A))
    assert ta.norm(ta.sub(back, A)) < 1e-12 * max(1.0, ta.norm(A))


def test_exp_of_zero_and_log_of_unit():
    assert ta.norm(ta.sub(ta.exp(ta.zero(P23)), ta.unit(P23))) == 0.0
    assert ta.norm(ta.log(ta.unit(P23))) == 0.0


def test_group_inverse():
    g = rand_group(P34, 12)
    prod = ta.mul(g, ta.inverse(g))
    assert prod.levels[0][0] == 1.0
    assert ta.norm(ta.sub(prod, ta.unit(P34))) < 1e-12


def test_log_requires_unit_level0():
    with pytest.raises(ValueError):
        ta.log(rand_algebra(P22, 13))
    with pytest.raises(ValueError):
        ta.inverse(rand_algebra(P22, 13))


def test_series_apply_needs_enough_coefficients():
    with pytest.raises(ValueError):
        ta.series_apply([1.0, 1.0], rand_algebra(P23, 14))


# ---------------------------------------------------------------------------
# norms and dilation
# ---------------------------------------------------------------------------

def test_hom_norm_mixed_degree_example():
    # |A_1| = 1 at degree 1 and |A_2| = 4 at degree 2 -> max(1, 4^{1/2}) = 2
    e1, e2 = ta.basis_vector(P22, 0), ta.basis_vector(P22, 1)
    A = ta.add(e1, ta.scale(ta.mul(e1, e2), 4.0))
    assert ta.hom_norm(A) == 2.0
    assert ta.hom_norm(ta.zero(P22)) == 0.0
    with pytest.raises(ValueError):
        ta.hom_norm(ta.unit(P22))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31), t=st.floats(-4.0, 4.0))
def test_scalar_multiple_bound_on_hom_norm(seed, t):
    A = rand_algebra(P23, seed)
    lhs = ta.hom_norm(ta.scale(A, t))
    rhs = max(1.0, abs(t)) * ta.hom_norm(A)
    assert lhs <= rhs * (1.0 + 1e-12)


@settings(max_examples=50, deadline=None)
@given(
    seed=st.integers(0, 2**31),
    t=st.one_of(st.just(0.0), st.floats(0.01, 4.0), st.floats(-4.0, -0.01)),
)
def test_dilation_scales_hom_norm_exactly(seed, t):
    # |t| bounded away from 0 so t**k cannot underflow
    A = rand_algebra(P23, seed)
    lhs = ta.hom_norm(ta.dilate(A, t))
    assert lhs == pytest.approx(abs(t) * ta.hom_norm(A), rel=1e-12, abs=0.0)


@settings(max_examples=50, deadline=None)
@given(s1=st.integers(0, 2**31), s2=st.integers(0, 2**31))
def test_hom_norm_subadditive(s1, s2):
    A, B = rand_algebra(P23, s1), rand_algebra(P23, s2)
    assert ta.hom_norm(ta.add(A, B)) <= ta.hom_norm(A) + ta.hom_norm(B) + 1e-13


def test_dilation_is_algebra_homomorphism():
    A, B = rand_algebra(P34, 15), rand_algebra(P34, 16)
    lam = -0.73
    lhs = ta.dilate(ta.mul(A, B), lam)
    rhs = ta.mul(ta.dilate(A, lam), ta.dilate(B, lam))
    assert ta.norm(ta.sub(lhs, rhs)) < 1e-12 * max(1.0, ta.norm(lhs))


def test_dilation_preserves_group_exactly():
    g = rand_group(P23, 17)
    h = ta.dilate(g, 0.31)
    assert isinstance(h, ta.GroupElement)
    assert h.levels[0][0] == 1.0


# ---------------------------------------------------------------------------
# graded operators, ad, Ad
# ---------------------------------------------------------------------------

def test_ad_operator_matches_bracket():
    xi, B = rand_algebra(P34, 18), rand_algebra(P34, 19)
    viaop = ta.ad_operator(xi).apply(B)
    direct = ta.bracket(xi, B)
    assert ta.norm(ta.sub(viaop, direct)) < 1e-12 * max(1.0, ta.norm(direct))


def test_conjugation_by_exponential_is_exp_of_ad():
    for seed in (20, 21, 22):
        A = rand_algebra(P34, seed)
        lhs = ta.conjugation_operator(ta.exp(A))
        rhs = ta.operator_exp(ta.ad_operator(A))
        assert lhs.frobenius_distance(rhs) < 1e-12 * (1.0 + ta.norm(A)) ** P34.kappa


def test_operator_exp_rejects_diagonal():
    with pytest.raises(ValueError):
        ta.operator_exp(ta.GradedOperator.identity(P22))


def test_operator_compose_matches_sequential_apply():
    S = ta.ad_operator(rand_algebra(P23, 23))
    T = ta.conjugation_operator(rand_group(P23, 24))
    x = rand_algebra(P23, 25)
    lhs = S.compose(T).apply(x)
    rhs = S.apply(T.apply(x))
    assert ta.norm(ta.sub(lhs, rhs)) < 1e-12 * max(1.0, ta.norm(rhs))


def test_operator_from_linear_map_rejects_degree_lowering():
    def drop(A):
        levels = [np.zeros(P22.level_dim(k)) for k in range(3)]
        levels[1][0] = float(A.levels[2][0])
        return ta.AlgebraElement(P22, levels)

    with pytest.raises(ValueError):
        ta.operator_from_linear_map(P22, drop)


def test_ad_series_apply_matches_explicit_sum():
    xi, B = rand_algebra(P34, 26), rand_algebra(P34, 27)
    coeffs = [0.3, -1.1, 0.25, 2.0]
    expect = ta.zero(P34)
    term = B
    for k, c in enumerate(coeffs):
        if k:
            term = ta.bracket(xi, term).as_algebra()
        expect = ta.add(expect, ta.scale(term, c))
    got = ta.ad_series_apply(coeffs, xi, B)
    assert ta.norm(ta.sub(got, expect)) < 1e-12 * max(1.0, ta.norm(expect))


def test_ad_nilpotency_order():
    # ad_xi raises degree, so its kappa-th power kills everything
    xi, B = rand_algebra(P23, 28), rand_algebra(P23, 29)
    coeffs = [0.0] * P23.kappa + [1.0]
    assert ta.norm(ta.ad_series_apply(coeffs, xi, B)) == 0.0


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_json_roundtrip():
    A = rand_algebra(P34, 30)
    back = ta.from_json_dict(ta.to_json_dict(A))
    assert back.params == A.params
    assert ta.norm(ta.sub(back, A)) == 0.0
    g = rand_group(P22, 31)
    assert ta.loads(ta.dumps(g)).levels[0][0] == 1.0
